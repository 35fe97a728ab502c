#!/usr/bin/env python3
"""
Analysis-dictionary shootout at fixed measurement counts.

Compares unweighted reconstruction with the fractional-order stack
{3.5, 4, 4.5}, the integer stack {3, 4, 5}, the single order {4}, and a
random tight frame of the same redundancy, on the same spikes and matrices.
"""
import argparse
import sys

from cospike.experiments import ExperimentConfig, run_sweep

METHODS = ("al1", "al1-miod", "al1-iod", "al1-rtf")
LABELS = {"al1": "MFOD {3.5,4,4.5}", "al1-miod": "MIOD {3,4,5}",
          "al1-iod": "IOD {4}", "al1-rtf": "random tight frame"}


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--trials", type=int, default=3)
    ap.add_argument("-M", "--measurements", default="16,32")
    ap.add_argument("--out", default="results/dictionaries")
    args = ap.parse_args()
    ms = tuple(int(v) for v in args.measurements.split(","))

    cfg = ExperimentConfig(trials=args.trials, master_seed=args.seed,
                           measurements=ms, methods=METHODS,
                           output_dir=args.out)
    reports = run_sweep(cfg)["reports"]

    for m in ms:
        print(f"M = {m}")
        for token in METHODS:
            rep = reports[token][m]
            print(f"  {LABELS[token]:<22} mean PRD {rep.mean_prd:7.3f}%  "
                  f"median {rep.median:7.3f}%  good {rep.good_probability:5.1f}%")
    return 0


if __name__ == "__main__":
    sys.exit(main())
