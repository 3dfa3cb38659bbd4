"""Command-line entry point."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .commands import CONFIG_ERROR, INFEASIBLE, INVARIANT, InvariantViolation, run
from .config import COMMANDS, ConfigError, load_config, parse_config
from .projective import InfeasibleError
from .report import emit_csv, provenance


def build_parser():
    p = argparse.ArgumentParser(prog="cocyclelab", description=__doc__)
    p.add_argument("--version", action="version", version=f"cocyclelab {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path, help="YAML configuration file")
        sp.add_argument("--out", type=Path, help="output directory (default from config, else ./out)")
        sp.add_argument("--seed", type=int, help="RNG seed (unsigned 64-bit)")
        sp.add_argument("--workers", type=int, help="worker processes (default: available CPUs)")
        sp.add_argument("--depth", type=int, help="conditional family depth")
        sp.add_argument("--grid-points", type=int, dest="grid_points", help="sweep grid levels")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    overrides = {"seed": args.seed, "depth": args.depth, "levels": args.grid_points,
                 "output": str(args.out) if args.out else None}
    try:
        if args.config is not None:
            cfg = load_config(args.config, args.command, overrides)
        else:
            cfg = parse_config({}, args.command, overrides)
    except ConfigError as exc:
        for line in exc.problems:
            print(f"config error: {line}", file=sys.stderr)
        return CONFIG_ERROR
    try:
        outcome = run(cfg, args.workers)
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return INFEASIBLE
    except InvariantViolation as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        return INVARIANT
    out_dir = Path(cfg.output)
    prov = provenance(cfg.digest, cfg.command)
    for name, rows in outcome.tables.items():
        path = emit_csv(rows, out_dir / name, provenance=prov)
        print(f"wrote {path}")
    for msg in outcome.messages:
        print(msg, file=sys.stderr)
    return outcome.code


if __name__ == "__main__":
    raise SystemExit(main())
