"""Outer alternating loop and the benchmark schemes.

One iteration refreshes, in order: decoders/weights, precoders (dual
bisection), surface coefficients (projected-gradient QCQP).  Each block
maximizes the shared surrogate with the others fixed, so the true weighted
sum rate never decreases between iterations; a guard aborts if numerics break
that promise.  Termination is by relative change of the weighted sum rate.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .beamformers import DualState, update_beamformers
from .channels import ChannelSet
from .errors import ConvergenceError
from .phases import PgdSettings, build_quadratic_forms, project_feasible, solve_qcqp, vectorize
from .system import (LN2, BeamformerSet, EffectiveChannels, IosState, RateReport,
                     compose_direct, compose_effective, stream_counts,
                     weighted_sum_rate)
from .wmmse import surrogate_objective, update_state

_STEP_TOL = 1e-9


class Scheme(str, enum.Enum):
    DS_IOS = "DS_IOS"   # dual-side surface, both directions active
    SS_IOS = "SS_IOS"   # single-side baseline: uplink only, user-side coefficients
    WO_IOS = "WO_IOS"   # no surface: direct links, precoding only


@dataclass
class SchemeSpec:
    kind: Scheme
    quantization_bits: int | None = None
    tie_sides: bool = False
    quantize_at_end: bool = False
    keep_downlink_power: bool = False   # SS variant that still radiates downlink

    def __post_init__(self) -> None:
        self.kind = Scheme(self.kind)
        if self.quantization_bits is not None and not (1 <= self.quantization_bits <= 16):
            raise ValueError("quantization_bits must be in [1, 16]")

    @property
    def uses_surface(self) -> bool:
        return self.kind is not Scheme.WO_IOS

    @property
    def optimizes_downlink(self) -> bool:
        return self.kind is not Scheme.SS_IOS

    @property
    def phase_sides(self) -> tuple[str, ...]:
        if self.kind is Scheme.DS_IOS:
            return ("t", "u")
        if self.kind is Scheme.SS_IOS:
            return ("u",)
        return ()

    @property
    def label(self) -> str:
        base = self.kind.value
        if self.quantization_bits is not None:
            base += f"_q{self.quantization_bits}"
        return base


@dataclass
class RunConfig:
    gamma_down: np.ndarray
    gamma_up: np.ndarray
    noise_users: np.ndarray
    noise_rx: float
    p_b: float
    p_u: float
    eps_w: float = 1e-4
    eps_b: float = 1e-4
    max_outer_iters: int = 500
    pgd: PgdSettings = field(default_factory=PgdSettings)
    divergence_rel_tol: float = 1e-6


@dataclass
class ConvergenceTrace:
    rates: list[float]                     # weighted sum rate per outer iteration
    iterations: int
    terminated_by: str                     # "tolerance" | "max_iters"
    step_surrogates: list[tuple[float, float, float]] = field(default_factory=list)


@dataclass
class RunResult:
    beamformers: BeamformerSet
    ios: IosState
    trace: ConvergenceTrace
    report: RateReport
    duals: DualState | None = None


def initial_beamformers(ch: ChannelSet, p_b: float, p_u: float) -> BeamformerSet:
    """Scaled identity columns: downlink splits the budget evenly, uplink fills it."""
    K = ch.n_users
    n_t = ch.h_ti.shape[1]
    n_r = ch.h_tr.shape[0]
    n_ur = ch.h_iu[0].shape[1]
    n_ut = ch.h_uu[0][0].shape[1]
    s_d, s_u = stream_counts(n_t, n_r, n_ut, n_ur)
    v_d = [np.sqrt(p_b / (K * s_d)) * np.eye(n_t, s_d, dtype=complex) for _ in range(K)]
    v_u = [np.sqrt(p_u / s_u) * np.eye(n_ut, s_u, dtype=complex) for _ in range(K)]
    return BeamformerSet(v_d, v_u)


def initial_ios(L: int, scheme: SchemeSpec) -> IosState:
    """Balanced split for the dual-side run; unused directions start at zero so
    they never pin amplitude the active direction could use."""
    if scheme.kind is Scheme.WO_IOS:
        return IosState.zeros(L)
    ios = IosState.balanced(L)
    if scheme.kind is Scheme.SS_IOS:
        zero = np.zeros(L, dtype=complex)
        ios.theta_t = zero.copy()
        ios.phi_t = zero.copy()
        ios.theta_u = zero.copy()
    return ios


def quantize_phases(ios: IosState, bits: int) -> IosState:
    """Snap every phase to the nearest of 2^bits uniform levels, keep amplitudes."""
    if not (1 <= bits <= 16):
        raise ValueError("bits must be in [1, 16]")
    delta = 2.0 * np.pi / (2 ** bits)

    def snap(vec: np.ndarray) -> np.ndarray:
        amp = np.abs(vec)
        ph = np.round(IosState.phases(vec) / delta) * delta
        return amp * np.exp(1j * ph)

    theta_t, phi_t = project_feasible(snap(ios.theta_t), snap(ios.phi_t))
    theta_u, phi_u = project_feasible(snap(ios.theta_u), snap(ios.phi_u))
    return IosState(theta_t, phi_t, theta_u, phi_u)


def _compose(ch: ChannelSet, ios: IosState, scheme: SchemeSpec) -> EffectiveChannels:
    if scheme.uses_surface:
        return compose_effective(ch, ios)
    return compose_direct(ch)


def apply_scheme(scheme: SchemeSpec, ch: ChannelSet, cfg: RunConfig
                 ) -> tuple[BeamformerSet, IosState, EffectiveChannels]:
    """Initial state for one run under the given benchmark scheme."""
    bf = initial_beamformers(ch, cfg.p_b, cfg.p_u)
    if scheme.kind is Scheme.SS_IOS and not scheme.keep_downlink_power:
        bf = BeamformerSet([np.zeros_like(v) for v in bf.v_d], bf.v_u)
    ios = initial_ios(ch.h_ti.shape[0], scheme)
    return bf, ios, _compose(ch, ios, scheme)


def run_algorithm2(ch: ChannelSet, cfg: RunConfig, scheme: SchemeSpec) -> RunResult:
    """Alternate decoder/weight, precoder, and surface updates to a fixed point."""
    bf, ios, eff = apply_scheme(scheme, ch, cfg)
    quantize_each_iter = (scheme.quantization_bits is not None
                          and not scheme.quantize_at_end and scheme.uses_surface)
    monotone = not quantize_each_iter

    report = weighted_sum_rate(eff, bf, cfg.gamma_down, cfg.gamma_up,
                               cfg.noise_users, cfg.noise_rx)
    rates = [report.weighted_sum]
    step_log: list[tuple[float, float, float]] = []
    duals: DualState | None = None
    terminated_by = "max_iters"
    iterations = 0

    def surr(e, b, s):
        return surrogate_objective(e, b, s, cfg.gamma_down, cfg.gamma_up,
                                   cfg.noise_users, cfg.noise_rx)

    def check(stage: str, new: float, old: float) -> None:
        if monotone and new < old - max(_STEP_TOL, cfg.divergence_rel_tol * abs(old)):
            raise ConvergenceError(f"surrogate decreased during {stage}: {old} -> {new}")

    prev_s4 = None
    for it in range(cfg.max_outer_iters):
        st = update_state(eff, bf, cfg.noise_users, cfg.noise_rx)
        s2 = surr(eff, bf, st)
        if prev_s4 is not None:
            check("decoder/weight update", s2, prev_s4)

        bf, duals = update_beamformers(eff, st, cfg.gamma_down, cfg.gamma_up,
                                       cfg.p_b, cfg.p_u, cfg.eps_b,
                                       update_downlink=scheme.optimizes_downlink,
                                       current=bf)
        s3 = surr(eff, bf, st)
        check("precoder update", s3, s2)

        if scheme.phase_sides:
            qf = build_quadratic_forms(ch, bf, st, cfg.gamma_down, cfg.gamma_up,
                                       cfg.noise_users, cfg.noise_rx)
            ios = solve_qcqp(vectorize(qf), ios, cfg.pgd,
                             sides=scheme.phase_sides, tie_sides=scheme.tie_sides)
            eff = _compose(ch, ios, scheme)
            s4 = surr(eff, bf, st)
            check("surface update", s4, s3)
        else:
            s4 = s3
        step_log.append((s2, s3, s4))
        prev_s4 = s4

        if quantize_each_iter:
            ios = quantize_phases(ios, scheme.quantization_bits)
            eff = _compose(ch, ios, scheme)
            prev_s4 = None  # quantization may step off the ascent path

        report = weighted_sum_rate(eff, bf, cfg.gamma_down, cfg.gamma_up,
                                   cfg.noise_users, cfg.noise_rx)
        new, old = report.weighted_sum, rates[-1]
        rates.append(new)
        iterations = it + 1
        if monotone and (old - new) > cfg.divergence_rel_tol * max(abs(new), 1e-12):
            raise ConvergenceError(
                f"weighted sum rate decreased at iteration {iterations}: {old} -> {new}")
        diff = abs(new - old)
        if diff == 0.0 or diff / max(abs(new), 1e-300) <= cfg.eps_w:
            terminated_by = "tolerance"
            break

    if scheme.quantization_bits is not None and scheme.quantize_at_end and scheme.uses_surface:
        ios = quantize_phases(ios, scheme.quantization_bits)
        eff = _compose(ch, ios, scheme)
        report = weighted_sum_rate(eff, bf, cfg.gamma_down, cfg.gamma_up,
                                   cfg.noise_users, cfg.noise_rx)

    trace = ConvergenceTrace(rates, iterations, terminated_by, step_log)
    return RunResult(bf, ios, trace, report, duals)
