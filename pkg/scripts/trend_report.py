"""Summarize the BER trends of a finished run (results/ layout from run_all.py).

Prints log10 BER at a chosen SNR for each curve so the mobility, path-count,
CT/DT and AFDM/OFDM orderings can be read off directly.
"""

import argparse
import csv
import math
from pathlib import Path


def read_curve(path: Path):
    rows = [line for line in path.read_text().splitlines() if not line.startswith("#")]
    return list(csv.DictReader(rows))


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("results", nargs="?", default="results")
    parser.add_argument("--snr", type=float, default=20.0)
    args = parser.parse_args()
    for path in sorted(Path(args.results).glob("ber_*/*.csv")):
        for row in read_curve(path):
            if float(row["snr_db"]) == args.snr:
                theory = float(row["ber_theory_mean"])
                print(f"{path.parent.name:14s} {path.stem:40s} log10 BER {math.log10(max(theory, 1e-300)):8.3f}")


if __name__ == "__main__":
    main()
