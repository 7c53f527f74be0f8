"""Regenerate every experiment's CSV output from the configs directory.

Usage: python3 scripts/run_all.py [--out results] [--threads 4] [--only psd crb]
"""

import argparse
import sys
import time
from pathlib import Path

from afdm_lab.cli import main as cli_main
from afdm_lab.experiments import EXPERIMENTS

ROOT = Path(__file__).resolve().parents[1]


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default=str(ROOT / "results"))
    parser.add_argument("--threads", type=int, default=4)
    parser.add_argument("--only", nargs="*", default=None)
    args = parser.parse_args()
    status = 0
    for name in args.only or EXPERIMENTS:
        start = time.perf_counter()
        code = cli_main([name, "--config", str(ROOT / "configs" / f"{name}.cfg"),
                         "--out", str(Path(args.out) / name), "--threads", str(args.threads)])
        print(f"{name}: exit {code} after {time.perf_counter() - start:.1f} s")
        status = max(status, code)
    return status


if __name__ == "__main__":
    sys.exit(main())
