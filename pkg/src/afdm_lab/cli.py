"""Command line entry point ``afdm-lab``."""

from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from .experiments import EXPERIMENTS, ConfigError, load_config, resolve_config, run


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="afdm-lab",
                                     description="Continuous-time AFDM simulation experiments.")
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--config", help="key = value config file (defaults are used when omitted)")
    parser.add_argument("--seed", type=int, help="override run.seed")
    parser.add_argument("--out", default="results", help="output directory for CSV files")
    parser.add_argument("--threads", type=int, default=1, help="worker threads for Monte Carlo trials")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.config:
            cfg = load_config(args.config, args.experiment, seed=args.seed, out=args.out, threads=args.threads)
        else:
            cfg = resolve_config(args.experiment, {}, seed=args.seed, out=args.out, threads=args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
