"""Monte-Carlo campaign runner: config parsing, sweeps, seeds, CSV output.

A campaign is a grid of (scheme, sweep value, seed) runs.  Runs are pure
functions of the resolved config, so the result set is deterministic and can
be farmed out to a process pool; rows are sorted canonically before writing,
which makes the output independent of worker count.
"""
from __future__ import annotations

import dataclasses
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .algorithm import RunConfig, Scheme, SchemeSpec, run_algorithm2
from .channels import FadingParams, sample_channels
from .errors import ConfigError
from .geometry import GeometryConfig, build_layout
from .phases import PgdSettings

SWEEP_AXES = ("none", "L", "P_B", "P_U", "tx_ios_distance")
FIGURES = ("fig2", "fig3", "fig4", "fig5", "fig6")


def dbm_to_mw(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0)


@dataclass
class ScenarioConfig:
    k_users: int = 3
    n_tx: int = 2
    n_rx: int = 2
    n_user_tx: int = 2
    n_user_rx: int = 2
    l_elements: int = 64
    tx_anchor: list = field(default_factory=lambda: [0.0, 0.0, 5.0])
    rx_anchor: list = field(default_factory=lambda: [0.0, 1.0, 5.0])
    ios_anchor: list = field(default_factory=lambda: [1.0, 1.0, 5.0])
    user_anchors: list = field(default_factory=lambda: [[20.0, 20.0, 1.5],
                                                        [25.0, -35.0, 1.5],
                                                        [35.0, -25.0, 1.5]])


@dataclass
class PhysicsConfig:
    wavelength_m: float = 0.05
    pathloss_exponent: float = 2.5
    rician_factor_db: float = 3.0
    noise_dbm: float = -80.0
    gain_exponent_tx: float = 2.0
    gain_exponent_rx: float = 2.0
    uu_free_space: bool = True


@dataclass
class PowersConfig:
    p_b_dbm: float = 10.0
    p_u_dbm: float = 5.0


@dataclass
class WeightsConfig:
    downlink: float = 0.5
    uplink: float = 0.5


@dataclass
class SolverSettings:
    eps_w: float = 1e-4
    eps_b: float = 1e-4
    max_outer_iters: int = 500
    pgd_max_iters: int = 500
    pgd_tolerance: float = 1e-8
    divergence_rel_tol: float = 1e-6


@dataclass
class SweepSpec:
    axis: str = "none"
    values: list = field(default_factory=list)


@dataclass
class CampaignConfig:
    name: str = "campaign"
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    physics: PhysicsConfig = field(default_factory=PhysicsConfig)
    powers: PowersConfig = field(default_factory=PowersConfig)
    weights: WeightsConfig = field(default_factory=WeightsConfig)
    solver: SolverSettings = field(default_factory=SolverSettings)
    sweep: SweepSpec = field(default_factory=SweepSpec)
    schemes: list[SchemeSpec] = field(default_factory=lambda: [SchemeSpec(Scheme.DS_IOS)])
    seeds: list[int] = field(default_factory=lambda: [0])


def _coerce(value: Any, template: Any, path: str) -> Any:
    try:
        if isinstance(template, bool):
            if not isinstance(value, bool):
                raise TypeError
            return value
        if isinstance(template, int) and not isinstance(template, bool):
            if isinstance(value, bool) or (isinstance(value, float) and value != int(value)):
                raise TypeError
            return int(value)
        if isinstance(template, float):
            return float(value)
        if isinstance(template, str):
            if not isinstance(value, str):
                raise TypeError
            return value
        if isinstance(template, list):
            if not isinstance(value, list):
                raise TypeError
            return value
    except (TypeError, ValueError):
        raise ConfigError(f"{path}: expected {type(template).__name__}, got {value!r}") from None
    return value


def _fill_dataclass(obj: Any, data: Any, path: str) -> Any:
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected an object")
    valid = {f.name for f in dataclasses.fields(obj)}
    for key, value in data.items():
        if key not in valid:
            raise ConfigError(f"{path}.{key}: unknown field")
        current = getattr(obj, key)
        if dataclasses.is_dataclass(current):
            _fill_dataclass(current, value, f"{path}.{key}")
        else:
            setattr(obj, key, _coerce(value, current, f"{path}.{key}"))
    return obj


def _parse_scheme(entry: Any, path: str) -> SchemeSpec:
    try:
        if isinstance(entry, str):
            return SchemeSpec(Scheme(entry))
        if isinstance(entry, dict):
            kind = entry.get("kind")
            if kind is None:
                raise ValueError("missing 'kind'")
            known = {"kind", "quantization_bits", "tie_sides", "quantize_at_end",
                     "keep_downlink_power"}
            extra = set(entry) - known
            if extra:
                raise ValueError(f"unknown fields {sorted(extra)}")
            return SchemeSpec(Scheme(kind),
                              quantization_bits=entry.get("quantization_bits"),
                              tie_sides=bool(entry.get("tie_sides", False)),
                              quantize_at_end=bool(entry.get("quantize_at_end", False)),
                              keep_downlink_power=bool(entry.get("keep_downlink_power", False)))
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    raise ConfigError(f"{path}: expected scheme name or object")


def _parse_seeds(data: Any, path: str) -> list[int]:
    if isinstance(data, list):
        if not data or not all(isinstance(s, int) and not isinstance(s, bool) for s in data):
            raise ConfigError(f"{path}: expected a nonempty list of integers")
        return list(data)
    if isinstance(data, dict):
        extra = set(data) - {"base", "count"}
        if extra:
            raise ConfigError(f"{path}.{sorted(extra)[0]}: unknown field")
        base = data.get("base", 0)
        count = data.get("count", 1)
        if not isinstance(base, int) or not isinstance(count, int) or count < 1:
            raise ConfigError(f"{path}: base must be an integer and count >= 1")
        return [base + i for i in range(count)]
    raise ConfigError(f"{path}: expected a list or {{base, count}}")


def config_from_dict(data: dict) -> CampaignConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root: expected an object")
    cfg = CampaignConfig()
    for key, value in data.items():
        if key == "name":
            if not isinstance(value, str) or not value:
                raise ConfigError("name: expected a nonempty string")
            cfg.name = value
        elif key in ("scenario", "physics", "powers", "weights", "solver", "sweep"):
            _fill_dataclass(getattr(cfg, key), value, key)
        elif key == "schemes":
            if not isinstance(value, list) or not value:
                raise ConfigError("schemes: expected a nonempty list")
            cfg.schemes = [_parse_scheme(e, f"schemes[{i}]") for i, e in enumerate(value)]
        elif key == "seeds":
            cfg.seeds = _parse_seeds(value, "seeds")
        else:
            raise ConfigError(f"{key}: unknown field")
    validate_config(cfg)
    return cfg


def validate_config(cfg: CampaignConfig) -> None:
    sc = cfg.scenario
    if sc.k_users < 1:
        raise ConfigError("scenario.k_users: must be >= 1")
    if len(sc.user_anchors) != sc.k_users:
        raise ConfigError("scenario.user_anchors: need one anchor per user")
    if cfg.sweep.axis not in SWEEP_AXES:
        raise ConfigError(f"sweep.axis: must be one of {SWEEP_AXES}")
    if cfg.sweep.axis != "none" and not cfg.sweep.values:
        raise ConfigError("sweep.values: must be nonempty for a sweep")
    for name, tol in (("eps_w", cfg.solver.eps_w), ("eps_b", cfg.solver.eps_b),
                      ("pgd_tolerance", cfg.solver.pgd_tolerance)):
        if tol <= 0:
            raise ConfigError(f"solver.{name}: must be positive")
    if not (0.0 < cfg.weights.downlink < 1.0 and 0.0 < cfg.weights.uplink < 1.0):
        raise ConfigError("weights: rate weights must lie strictly inside (0, 1)")


def load_config(path: str | Path) -> CampaignConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    return config_from_dict(raw)


def apply_overrides(data: dict, overrides: list[tuple[str, str]]) -> dict:
    """Set `--section.field value` pairs into the raw config dict."""
    for flag, raw_value in overrides:
        segments = [seg.replace("-", "_") for seg in flag.split(".")]
        try:
            value = json.loads(raw_value)
        except json.JSONDecodeError:
            value = raw_value
        node = data
        for seg in segments[:-1]:
            node = node.setdefault(seg, {})
            if not isinstance(node, dict):
                raise ConfigError(f"{flag}: cannot override a scalar with a field path")
        node[segments[-1]] = value
    return data


@dataclass
class ResultRow:
    scheme: str
    sweep_value: float | None
    seed: int
    weighted_sum_rate: float
    r_down: list[float]
    r_up: list[float]
    iterations: int
    terminated_by: str
    wall_ms: float


def _sweep_scenario(cfg: CampaignConfig, value) -> tuple[ScenarioConfig, PowersConfig]:
    sc = dataclasses.replace(cfg.scenario)
    pw = dataclasses.replace(cfg.powers)
    axis = cfg.sweep.axis
    if axis == "none" or value is None:
        return sc, pw
    if axis == "L":
        sc.l_elements = int(value)
    elif axis == "P_B":
        pw.p_b_dbm = float(value)
    elif axis == "P_U":
        pw.p_u_dbm = float(value)
    elif axis == "tx_ios_distance":
        tx = np.asarray(sc.tx_anchor, dtype=float)
        ios = np.asarray(sc.ios_anchor, dtype=float)
        direction = ios - tx
        norm = np.linalg.norm(direction)
        if norm == 0:
            raise ConfigError("scenario: tx and ios anchors coincide; cannot sweep distance")
        sc.ios_anchor = (tx + direction / norm * float(value)).tolist()
    return sc, pw


def _run_config(cfg: CampaignConfig, pw: PowersConfig, k_users: int) -> RunConfig:
    gamma_down = np.full(k_users, cfg.weights.downlink)
    gamma_up = np.full(k_users, cfg.weights.uplink)
    noise = dbm_to_mw(cfg.physics.noise_dbm)
    return RunConfig(
        gamma_down=gamma_down,
        gamma_up=gamma_up,
        noise_users=np.full(k_users, noise),
        noise_rx=noise,
        p_b=dbm_to_mw(pw.p_b_dbm),
        p_u=dbm_to_mw(pw.p_u_dbm),
        eps_w=cfg.solver.eps_w,
        eps_b=cfg.solver.eps_b,
        max_outer_iters=cfg.solver.max_outer_iters,
        pgd=PgdSettings(cfg.solver.pgd_max_iters, cfg.solver.pgd_tolerance),
        divergence_rel_tol=cfg.solver.divergence_rel_tol,
    )


def execute_run(cfg: CampaignConfig, scheme: SchemeSpec, sweep_value, seed: int
                ) -> tuple[ResultRow, list[float]]:
    """One (scheme, sweep value, seed) cell; pure function of its arguments."""
    start = time.perf_counter()
    sc, pw = _sweep_scenario(cfg, sweep_value)
    geo = GeometryConfig(
        n_tx=sc.n_tx, n_rx=sc.n_rx, n_elements=sc.l_elements,
        n_user_tx=sc.n_user_tx, n_user_rx=sc.n_user_rx,
        tx_anchor=np.asarray(sc.tx_anchor, float),
        rx_anchor=np.asarray(sc.rx_anchor, float),
        ios_anchor=np.asarray(sc.ios_anchor, float),
        user_anchors=np.asarray(sc.user_anchors, float),
        wavelength=cfg.physics.wavelength_m,
    )
    layout = build_layout(geo)
    fading = FadingParams.from_db(
        cfg.physics.rician_factor_db,
        pathloss_exponent=cfg.physics.pathloss_exponent,
        gain_exponent_tx=cfg.physics.gain_exponent_tx,
        gain_exponent_rx=cfg.physics.gain_exponent_rx,
        uu_free_space=cfg.physics.uu_free_space,
    )
    ch = sample_channels(layout, fading, seed,
                         include_direct=scheme.kind is Scheme.WO_IOS)
    result = run_algorithm2(ch, _run_config(cfg, pw, sc.k_users), scheme)
    wall_ms = (time.perf_counter() - start) * 1e3
    row = ResultRow(
        scheme=scheme.label,
        sweep_value=None if sweep_value is None else float(sweep_value),
        seed=seed,
        weighted_sum_rate=result.report.weighted_sum,
        r_down=[float(r) for r in result.report.r_down],
        r_up=[float(r) for r in result.report.r_up],
        iterations=result.trace.iterations,
        terminated_by=result.trace.terminated_by,
        wall_ms=wall_ms,
    )
    return row, list(result.trace.rates)


def _worker(args) -> tuple[tuple, ResultRow, list[float]]:
    cfg, scheme, sweep_value, seed = args
    row, trace = execute_run(cfg, scheme, sweep_value, seed)
    return (scheme.label, sweep_value, seed), row, trace


def _row_key(row: ResultRow):
    sv = -np.inf if row.sweep_value is None else row.sweep_value
    return (row.scheme, sv, row.seed)


def run_campaign(cfg: CampaignConfig, threads: int = 1
                 ) -> tuple[list[ResultRow], dict[tuple, list[float]]]:
    """All cells of the campaign grid, canonically ordered."""
    values = cfg.sweep.values if cfg.sweep.axis != "none" else [None]
    jobs = [(cfg, scheme, value, seed)
            for scheme in cfg.schemes for value in values for seed in cfg.seeds]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(_worker, jobs))
    else:
        outcomes = [_worker(job) for job in jobs]
    rows = sorted((row for _, row, _ in outcomes), key=_row_key)
    traces = {key: trace for key, _, trace in outcomes}
    return rows, traces


def _fmt(x: float) -> str:
    return repr(float(x))


def results_header(k_users: int) -> list[str]:
    return (["scheme", "sweep_value", "seed", "weighted_sum_rate", "iterations",
             "terminated_by"]
            + [f"r_down_{k}" for k in range(k_users)]
            + [f"r_up_{k}" for k in range(k_users)]
            + ["wall_ms"])


def rows_to_csv(rows: list[ResultRow]) -> str:
    if not rows:
        raise ConfigError("no rows to write")
    k = len(rows[0].r_down)
    lines = [",".join(results_header(k))]
    for r in rows:
        fields = [r.scheme,
                  "" if r.sweep_value is None else _fmt(r.sweep_value),
                  str(r.seed), _fmt(r.weighted_sum_rate), str(r.iterations),
                  r.terminated_by]
        fields += [_fmt(x) for x in r.r_down] + [_fmt(x) for x in r.r_up]
        fields += [_fmt(r.wall_ms)]
        lines.append(",".join(fields))
    return "\n".join(lines) + "\n"


def read_results_csv(text: str) -> list[ResultRow]:
    lines = [ln for ln in text.splitlines() if ln]
    header = lines[0].split(",")
    down_cols = [i for i, h in enumerate(header) if h.startswith("r_down_")]
    up_cols = [i for i, h in enumerate(header) if h.startswith("r_up_")]
    idx = {h: i for i, h in enumerate(header)}
    rows = []
    for ln in lines[1:]:
        parts = ln.split(",")
        sv = parts[idx["sweep_value"]]
        rows.append(ResultRow(
            scheme=parts[idx["scheme"]],
            sweep_value=None if sv == "" else float(sv),
            seed=int(parts[idx["seed"]]),
            weighted_sum_rate=float(parts[idx["weighted_sum_rate"]]),
            r_down=[float(parts[i]) for i in down_cols],
            r_up=[float(parts[i]) for i in up_cols],
            iterations=int(parts[idx["iterations"]]),
            terminated_by=parts[idx["terminated_by"]],
            wall_ms=float(parts[idx["wall_ms"]]),
        ))
    return rows


def write_campaign(cfg: CampaignConfig, out_dir: str | Path, threads: int = 1) -> Path:
    """Run the campaign and lay results out under out_dir/<name>/."""
    rows, traces = run_campaign(cfg, threads)
    base = Path(out_dir) / cfg.name
    trace_dir = base / "traces"
    trace_dir.mkdir(parents=True, exist_ok=True)
    (base / "results.csv").write_text(rows_to_csv(rows))
    (base / "config.echo.json").write_text(
        json.dumps(dataclasses.asdict(cfg), indent=2, default=str) + "\n")
    for (label, sweep_value, seed), trace in sorted(
            traces.items(), key=lambda kv: (kv[0][0], str(kv[0][1]), kv[0][2])):
        sv = "none" if sweep_value is None else repr(float(sweep_value))
        lines = ["iteration,weighted_sum_rate"]
        lines += [f"{i},{_fmt(r)}" for i, r in enumerate(trace)]
        (trace_dir / f"{label}_{sv}_{seed}.csv").write_text("\n".join(lines) + "\n")
    return base


@dataclass
class AggregateRow:
    sweep_value: float | None
    scheme: str
    mean_rate: float
    stderr: float
    n: int


def emit_figure_data(rows: list[ResultRow], figure: str) -> list[AggregateRow]:
    """Mean and standard error of the weighted sum rate per sweep point per scheme."""
    if figure not in FIGURES:
        raise ConfigError(f"figure: must be one of {FIGURES}")
    if not rows:
        raise ConfigError("aggregation needs at least one result row")
    groups: dict[tuple, list[float]] = {}
    for r in rows:
        groups.setdefault((r.sweep_value, r.scheme), []).append(r.weighted_sum_rate)

    def group_key(key):
        sv, scheme = key
        return (-np.inf if sv is None else sv, scheme)

    out = []
    for key in sorted(groups, key=group_key):
        vals = np.asarray(groups[key])
        n = len(vals)
        stderr = float(np.std(vals, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
        out.append(AggregateRow(key[0], key[1], float(np.mean(vals)), stderr, n))
    return out


def aggregates_to_csv(aggs: list[AggregateRow]) -> str:
    lines = ["sweep_value,scheme,mean_rate,stderr,n"]
    for a in aggs:
        sv = "" if a.sweep_value is None else _fmt(a.sweep_value)
        lines.append(f"{sv},{a.scheme},{_fmt(a.mean_rate)},{_fmt(a.stderr)},{a.n}")
    return "\n".join(lines) + "\n"
