"""``wgfem`` command line: converge, properties, list-problems.

Exit codes: 0 success, 1 numerical failure, 2 configuration error.
"""
from __future__ import annotations

import argparse
import dataclasses
import io
import logging
import sys

from .problems import builtin_problems
from .solver import SolverError
from .study import ConfigError, RunConfig, run_convergence

EXIT_OK, EXIT_NUMERIC, EXIT_CONFIG = 0, 1, 2

_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def read_config_file(path) -> dict:
    """Parse ``key=value`` lines; ``#`` starts a comment."""
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in _FIELDS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            out[key] = value
    return out


def _coerce(key, value):
    default = getattr(RunConfig, key, None)
    if isinstance(default, bool):
        return value.lower() in ("1", "true", "yes")
    if isinstance(default, int):
        return int(value)
    if isinstance(default, float):
        return float(value)
    return value


def build_config(args) -> RunConfig:
    values = {}
    if args.config:
        try:
            values.update(read_config_file(args.config))
        except OSError as exc:
            raise ConfigError(str(exc)) from exc
    for key in _FIELDS:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    try:
        values = {k: _coerce(k, v) if isinstance(v, str) else v for k, v in values.items()}
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return RunConfig(**values).validate()


def cmd_converge(args) -> int:
    config = build_config(args)
    report = run_convergence(config)
    buf = io.StringIO()
    if config.format == "csv":
        report.to_csv(buf)
    else:
        buf.write(f"# problem={report.problem} k={report.k} diagonal={config.diagonal}\n")
        buf.write(report.to_table())
    if config.out:
        with open(config.out, "w", newline="") as fh:
            fh.write(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


def cmd_properties(args) -> int:
    from .properties import run_properties

    summary = run_properties(args.seed, quick=args.quick)
    for r in summary.results:
        if args.verbose or not r.passed:
            print(r.line())
    n_fail = len(summary.failures)
    print(f"seed={args.seed}: {len(summary.results) - n_fail} passed, {n_fail} failed")
    return EXIT_OK if summary.passed else EXIT_NUMERIC


def cmd_list(args) -> int:
    for p in builtin_problems():
        print(f"{p.name:<12} {p.description}")
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wgfem", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--log-level", default="WARNING")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("converge", help="run a mesh-series convergence study")
    p.add_argument("--config", help="key=value file; flags override it")
    p.add_argument("--problem")
    p.add_argument("--k", type=int)
    p.add_argument("--n", type=int, help="squares per side on the coarsest mesh")
    p.add_argument("--levels", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iter", dest="max_iter", type=int)
    p.add_argument("--format", choices=("table", "csv"))
    p.add_argument("--out")
    p.add_argument("--threads", type=int)
    p.add_argument("--diagonal", choices=("se-nw", "sw-ne"))
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("properties", help="run the property battery")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--quick", action="store_true", help="smaller meshes and sample counts")
    p.add_argument("--verbose", action="store_true", help="print passing checks too")
    p.set_defaults(func=cmd_properties)

    p = sub.add_parser("list-problems", help="list built-in problems")
    p.set_defaults(func=cmd_list)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
