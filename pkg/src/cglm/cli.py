"""Command line entry point: `cglm run | compare | verify`."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from .config import ConfigError, load_config


def _load(args):
    cfg = load_config(args.config)
    if args.tol is not None:
        cfg = replace(cfg, tol=args.tol)
    return cfg.validate()


def _report(result) -> int:
    for b in result.bands:
        print(b.line())
    print(f"wrote {len(result.files)} files and manifest.json to {result.outdir}")
    return 0 if result.passed else 1


def cmd_run(args) -> int:
    from .experiments import run_experiment

    return _report(run_experiment(_load(args), args.workers, args.out))


def cmd_compare(args) -> int:
    from .experiments import compare_methods

    return _report(compare_methods(_load(args), args.workers, args.out))


def cmd_verify(args) -> int:
    from .verify import SUITES, run_suites

    names = args.suite or list(SUITES)
    checks, timing = run_suites(names, args.tol or 1e-10)
    for c in checks:
        print(c.line())
    failed = sum(not c.passed for c in checks)
    total = sum(timing.values())
    print(f"{len(checks) - failed}/{len(checks)} checks passed in {total:.1f}s")
    return 0 if failed == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cglm", description="Hybrid multiscale FEM experiments.")
    p.add_argument("-v", "--verbose", action="store_true", help="log stage timings")
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn, helptext in (("run", cmd_run, "run the configured experiment"),
                               ("compare", cmd_compare, "concurrent vs global-local comparison")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--config", required=True, help="INI experiment file")
        s.add_argument("--out", help="output directory (overrides the config)")
        s.add_argument("--workers", type=int, default=1, help="concurrent ladder entries")
        s.add_argument("--tol", type=float, help="linear solver tolerance (overrides the config)")
        s.set_defaults(fn=fn)
    s = sub.add_parser("verify", help="run the invariant suites")
    s.add_argument("--suite", action="append", help="restrict to a suite (repeatable)")
    s.add_argument("--tol", type=float)
    s.set_defaults(fn=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
