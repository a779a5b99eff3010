"""Batch command-line front end.

Three subcommands:

* ``simulate`` runs a Monte Carlo sweep from a JSON config and writes
  ``sweep.csv`` (plus optional SVG figures) into an output directory.
* ``oracle`` exhaustively enumerates the randomization distribution for
  a table CSV and emits exact moments as CSV.
* ``theory`` evaluates the closed-form moments for a table CSV.

Exit codes: 0 success, 1 runtime failure (e.g. rejection-sampler
acceptance failure, enumeration too large), 2 usage or unreadable
input.  Diagnostics go to stderr as a single line.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path

from . import oracle as oracle_mod
from . import simulation, theory
from .assignment import Design
from .population import read_table_csv

ORACLE_CSV_HEADER = (
    "estimator", "pi_b", "conditional_event", "event_probability",
    "mean", "variance", "mean_varhat", "mean_varhat_plugin",
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hiddenfactor",
        description="Randomization-based inference for 2x2 studies "
        "with one uncontrolled factor",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a Monte Carlo sweep from a JSON config")
    sim.add_argument("--config", required=True, help="JSON sweep configuration")
    sim.add_argument("--out", required=True, help="output directory for sweep.csv")
    sim.add_argument("--svg", action="store_true", help="also render SVG figures")
    sim.add_argument(
        "--threads", type=int, default=None,
        help="worker threads (default: HFL_THREADS env var, else 1)",
    )

    orc = sub.add_parser("oracle", help="exact enumeration moments for a table CSV")
    orc.add_argument("--table", required=True, help="potential-outcomes CSV")
    orc.add_argument("--n-plus", type=int, required=True, help="units assigned +1 on A")
    orc.add_argument("--pi-b", type=float, required=True, help="B assignment probability")
    orc.add_argument(
        "--min-cell", type=int, default=2,
        help="cell-count conditioning for the cell-contrast estimator (default 2)",
    )
    orc.add_argument(
        "--estimator", choices=("theta_a_1", "theta_a_2", "both"), default="both"
    )
    orc.add_argument("--out", default=None, help="output CSV (default: stdout)")

    thr = sub.add_parser("theory", help="closed-form moments for a table CSV")
    thr.add_argument("--table", required=True, help="potential-outcomes CSV")
    thr.add_argument("--n-plus", type=int, required=True, help="units assigned +1 on A")
    thr.add_argument("--pi-b", type=float, required=True, help="B assignment probability")
    thr.add_argument("--out", default=None, help="output CSV (default: stdout)")
    return parser


def _resolve_threads(flag_value: int | None) -> int:
    if flag_value is not None:
        value = flag_value
    else:
        env = os.environ.get("HFL_THREADS", "").strip()
        value = int(env) if env else 1
    if value < 1:
        raise ValueError("threads must be a positive integer")
    return value


def _fmt(value: float) -> str:
    return "" if isinstance(value, float) and math.isnan(value) else repr(value)


def _write_rows(header, rows, out_path) -> None:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    if out_path is None:
        sys.stdout.write(buffer.getvalue())
    else:
        Path(out_path).write_text(buffer.getvalue(), encoding="utf-8")


def _cmd_simulate(args) -> int:
    try:
        threads = _resolve_threads(args.threads)
        payload = json.loads(Path(args.config).read_text(encoding="utf-8"))
        config = simulation.sweep_config_from_dict(payload)
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
    except (OSError, ValueError, TypeError, KeyError) as exc:
        print(f"hiddenfactor: bad simulate input: {exc}", file=sys.stderr)
        return 2
    try:
        result = simulation.run_sweep(config, threads=threads)
        sweep_path = out_dir / "sweep.csv"
        simulation.write_sweep_csv(result, sweep_path)
        written = [sweep_path]
        if args.svg:
            from .report import emit_figures

            written.extend(emit_figures(result, out_dir))
    except Exception as exc:
        print(f"hiddenfactor: simulate failed: {exc}", file=sys.stderr)
        return 1
    for path in written:
        print(path)
    return 0


def _load_table_design(args):
    table = read_table_csv(args.table)
    design = Design(table.n_units, args.n_plus, args.pi_b)
    return table, design


def _cmd_oracle(args) -> int:
    try:
        table, design = _load_table_design(args)
    except (OSError, ValueError) as exc:
        print(f"hiddenfactor: bad oracle input: {exc}", file=sys.stderr)
        return 2
    try:
        rows = []
        if args.estimator in ("theta_a_1", "both"):
            m = oracle_mod.enumerate_theta1(table, design)
            rows.append(
                (
                    "theta_a_1", repr(design.pi_b), m.conditional_event,
                    repr(m.event_probability), repr(m.mean), repr(m.variance),
                    _fmt(m.mean_varhat), _fmt(m.mean_varhat_plugin),
                )
            )
        if args.estimator in ("theta_a_2", "both"):
            m = oracle_mod.enumerate_theta2(table, design, min_cell=args.min_cell)
            rows.append(
                (
                    "theta_a_2", repr(design.pi_b), m.conditional_event,
                    repr(m.event_probability), repr(m.mean), repr(m.variance),
                    _fmt(m.mean_varhat), _fmt(m.mean_varhat_plugin),
                )
            )
        _write_rows(ORACLE_CSV_HEADER, rows, args.out)
    except Exception as exc:
        print(f"hiddenfactor: oracle failed: {exc}", file=sys.stderr)
        return 1
    return 0


def _cmd_theory(args) -> int:
    try:
        table, design = _load_table_design(args)
    except (OSError, ValueError) as exc:
        print(f"hiddenfactor: bad theory input: {exc}", file=sys.stderr)
        return 2
    try:
        moments = theory.theoretical_moments(table, design)
        header = theory.moments_csv_header()
        row = [
            repr(getattr(moments, name.removeprefix("exact_"))) for name in header
        ]
        _write_rows(header, [row], args.out)
    except Exception as exc:
        print(f"hiddenfactor: theory failed: {exc}", file=sys.stderr)
        return 1
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command == "simulate":
        return _cmd_simulate(args)
    if args.command == "oracle":
        return _cmd_oracle(args)
    return _cmd_theory(args)


if __name__ == "__main__":
    raise SystemExit(main())
