#!/usr/bin/env python3
"""
Spike sorting from compressed measurements.

Reconstructs every spike from M random Bernoulli measurements, extracts PCA
features, clusters with k-means, and scores against the ground-truth units;
the uncompressed originals give the upper bound.
"""
import argparse
import sys

from cospike.experiments import ExperimentConfig, run_classification


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("-M", "--classify-m", type=int, default=16)
    ap.add_argument("--frames-per-unit", type=int, default=70)
    ap.add_argument("--out", default="results/classify")
    args = ap.parse_args()

    cfg = ExperimentConfig(frames_per_unit=args.frames_per_unit,
                           classify_m=args.classify_m, master_seed=args.seed,
                           methods=("walm",), output_dir=args.out)
    result = run_classification(cfg)
    for token, report in result["reports"].items():
        print(f"{token:>10}: accuracy {report.accuracy:6.2f}%")
        for row in report.confusion:
            print(f"{'':>12}{row.tolist()}")
    print(f"report: {result['report_path']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
