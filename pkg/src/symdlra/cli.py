"""Command-line entry point ``symdlra``.

Each subcommand writes one CSV file: a ``# config`` comment line with the
full configuration as JSON, a header row, then data rows with floats in
``%.16e`` format.  Exit codes: 0 success, 1 usage error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import asdict
from pathlib import Path

from . import experiments
from .experiments import ExperimentConfig
from .quantum import NumericalFailure

OUT_DIR_ENV = "SYMDLRA_OUT_DIR"
EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _format(value) -> str:
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return "%.16e" % value
    return str(value)


def write_csv(stream, config: dict, columns: list[str], rows: list[list]) -> None:
    stream.write("# config " + json.dumps(config, sort_keys=True) + "\n")
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_format(v) for v in row])


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=1)
    common.add_argument("--out", help="output CSV path, '-' for stdout")
    common.add_argument("--preset", choices=experiments.PRESETS, default="desk")
    common.add_argument("--h", type=_float_list, help="step size or comma-separated sweep")
    common.add_argument("--rank", type=_int_list, help="rank or comma-separated ranks")
    common.add_argument("--T", type=float, help="final time")

    parser = _Parser(prog="symdlra", description="Symmetry-preserving low-rank integrator experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("tucker-add", parents=[common], help="one-step addition of symmetric Tucker tensors")
    p.add_argument("--n", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--timings", action="store_true", help="append wall-time columns (not deterministic)")

    p = sub.add_parser("matrix-explicit", parents=[common], help="explicitly given symmetric matrix, sym_step vs RK4")
    p.add_argument("--n", type=int, help="matrix size N")

    p = sub.add_parser("lyapunov", parents=[common], help="Lyapunov equation rank and step size sweep")
    p.add_argument("--n", type=int, help="matrix size N (a perfect square)")
    p.add_argument("--rtol", type=float, default=1e-10)
    p.add_argument("--atol", type=float, default=1e-14)

    for name, text in (("ground-state", "imaginary-time ground states"), ("laser", "laser-driven real-time run")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--n", type=int, help="grid points K")
        p.add_argument("--d", type=int, help="number of particles")
        if name == "laser":
            p.add_argument("--A0", type=float, help="pulse amplitude")
            p.add_argument("--no-enforce", dest="enforce", action="store_false")

    sub.add_parser("selftest", help="structured versus dense oracle checks")
    return parser


def _config(args) -> ExperimentConfig:
    fields = {k: v for k, v in vars(args).items() if k in ExperimentConfig.__dataclass_fields__ and v is not None}
    return experiments.resolve_defaults(ExperimentConfig(**fields))


def _output_path(args, cfg: ExperimentConfig) -> Path | None:
    if args.out == "-":
        return None
    if args.out:
        return Path(args.out)
    base = Path(os.environ.get(OUT_DIR_ENV, "."))
    return base / f"{cfg.command}_{cfg.preset}_seed{cfg.seed}.csv"


def _selftest() -> int:
    from .selftest import oracle_checks

    ok = True
    for c in oracle_checks():
        status = "PASS" if c.passed else "FAIL"
        ok &= c.passed
        print(f"{status} {c.name} d={c.d} K={c.K} r={c.r} rel_error={c.rel_error:.2e}")
    return EXIT_OK if ok else EXIT_NUMERICAL


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "selftest":
            return _selftest()
        cfg = _config(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"symdlra: error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    try:
        columns, rows = experiments.RUNNERS[cfg.command](cfg)
    except (NumericalFailure, FloatingPointError, ArithmeticError) as exc:
        print(f"symdlra: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    bad = [r for r in rows if any(isinstance(v, float) and math.isinf(v) for v in r)]
    if bad:
        print(f"symdlra: numerical failure: {len(bad)} rows with infinite values", file=sys.stderr)
        return EXIT_NUMERICAL

    config = asdict(cfg)
    path = _output_path(args, cfg)
    if path is None:
        write_csv(sys.stdout, config, columns, rows)
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            write_csv(fh, config, columns, rows)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
