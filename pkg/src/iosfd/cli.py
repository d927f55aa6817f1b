"""Command-line front end.

    iosfd simulate --config cfg.json [--threads N] [--out DIR] [--section.field value ...]
    iosfd aggregate --figure figN --in results.csv [--out FILE]

Exit codes: 0 success, 2 configuration error, 3 numerical/divergence error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .campaign import (aggregates_to_csv, apply_overrides, config_from_dict,
                       emit_figure_data, read_results_csv, write_campaign)
from .errors import ConfigError, ConvergenceError, GeometryError, NumericalError


def _parse_overrides(extras: list[str]) -> list[tuple[str, str]]:
    pairs = []
    i = 0
    while i < len(extras):
        flag = extras[i]
        if not flag.startswith("--") or len(flag) <= 2:
            raise ConfigError(f"unrecognized argument: {flag}")
        if i + 1 >= len(extras):
            raise ConfigError(f"override {flag} is missing a value")
        pairs.append((flag[2:], extras[i + 1]))
        i += 2
    return pairs


def _simulate(args, extras: list[str]) -> int:
    try:
        raw = json.loads(Path(args.config).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {args.config}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    apply_overrides(raw, _parse_overrides(extras))
    cfg = config_from_dict(raw)
    threads = args.threads if args.threads else (os.cpu_count() or 1)
    base = write_campaign(cfg, args.out, threads=threads)
    print(f"wrote {base / 'results.csv'}")
    return 0


def _aggregate(args, extras: list[str]) -> int:
    if extras:
        raise ConfigError(f"unrecognized argument: {extras[0]}")
    try:
        text = Path(args.infile).read_text()
    except FileNotFoundError:
        raise ConfigError(f"results file not found: {args.infile}") from None
    rows = read_results_csv(text)
    csv_text = aggregates_to_csv(emit_figure_data(rows, args.figure))
    if args.out:
        Path(args.out).write_text(csv_text)
    else:
        sys.stdout.write(csv_text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="iosfd", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a Monte-Carlo campaign")
    sim.add_argument("--config", required=True, help="campaign config (JSON)")
    sim.add_argument("--threads", type=int, default=0,
                     help="worker processes (default: all cores)")
    sim.add_argument("--out", default="out", help="output directory")

    agg = sub.add_parser("aggregate", help="aggregate a results.csv into figure data")
    agg.add_argument("--figure", required=True, help="fig2 .. fig6")
    agg.add_argument("--in", dest="infile", required=True, help="results.csv path")
    agg.add_argument("--out", default=None, help="output CSV (default stdout)")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args, extras = parser.parse_known_args(argv)
    try:
        if args.command == "simulate":
            return _simulate(args, extras)
        return _aggregate(args, extras)
    except (ConfigError, GeometryError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, ConvergenceError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
