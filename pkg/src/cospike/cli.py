"""Command-line entry points for the experiment protocols.

Each subcommand reads an optional flat config file (``key = value`` lines)
and accepts one override flag per config key (same name, dash-cased).
Exit codes: 0 success, 1 config error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from .errors import ConfigError, CospikeError
from .experiments import (
    ExperimentConfig,
    apply_overrides,
    parse_flat_config,
    run_classification,
    run_co_sparsity,
    run_sweep,
    run_training,
)
from .spikes import load_dataset, save_dataset, synthesize_dataset


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; those are config errors here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="FILE",
                        help="flat key = value config file")
    for f in fields(ExperimentConfig):
        flag = "--" + f.name.replace("_", "-")
        parser.add_argument(flag, dest=f.name, metavar="V", default=None,
                            help=f"override config key {f.name}")


def _resolve_config(args) -> ExperimentConfig:
    config = ExperimentConfig()
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        config = parse_flat_config(path.read_text())
    overrides = {f.name: getattr(args, f.name)
                 for f in fields(ExperimentConfig)
                 if getattr(args, f.name, None) is not None}
    config = apply_overrides(config, overrides)
    config.validate()
    return config


def _cmd_synth(args) -> int:
    config = _resolve_config(args)
    dataset = synthesize_dataset(
        units=config.units, frames_per_unit=config.frames_per_unit,
        n=config.frame_length, noise_sigma=config.noise_sigma,
        seed=config.master_seed, jitter=config.jitter,
        scale_jitter=config.scale_jitter)
    save_dataset(dataset, args.out, fmt=args.format)
    print(f"wrote {len(dataset)} frames (n={dataset.frame_length}, "
          f"units={config.units}) to {args.out}")
    return 0


def _cmd_train(args) -> int:
    config = _resolve_config(args)
    result = run_training(config)
    model = result["model"]
    print(f"variance model: a={model.a:.6g} b={model.b:.6g} c={model.c:.6g} "
          f"residual={model.residual:.3g}")
    print(f"wrote {result['model_path']} and {result['scatter_path']}")
    return 0


def _cmd_sweep(args) -> int:
    config = _resolve_config(args)
    result = run_sweep(config)
    for token, per_m in result["reports"].items():
        for m in config.measurements:
            rep = per_m[m]
            print(f"{token:10s} M={m:3d}  mean PRD {rep.mean_prd:7.3f}%  "
                  f"good {rep.good_probability:6.2f}%")
    print(f"wrote {result['manifest_path']}")
    return 0


def _cmd_classify(args) -> int:
    config = _resolve_config(args)
    result = run_classification(config)
    for token, report in result["reports"].items():
        print(f"{token:10s} accuracy {report.accuracy:6.2f}%")
    print(f"wrote {result['report_path']}")
    return 0


def _cmd_co_sparsity(args) -> int:
    config = _resolve_config(args)
    result = run_co_sparsity(config)
    print(f"wrote {result['curve_path']} and {result['hist_path']}")
    return 0


def _cmd_convert_check(args) -> int:
    dataset = load_dataset(args.dataset, fmt=args.format)
    frames = dataset.to_matrix()
    print(f"{args.dataset}: {len(dataset)} frames, n={dataset.frame_length}, "
          f"labeled={dataset.labeled}")
    if dataset.labeled:
        labels = dataset.labels()
        values, counts = np.unique(labels, return_counts=True)
        hist = ", ".join(f"{v}: {c}" for v, c in zip(values, counts))
        print(f"label histogram: {hist}")
    peaks = np.argmax(np.abs(frames), axis=1)
    print(f"|peak| index: median {int(np.median(peaks))}, "
          f"range [{peaks.min()}, {peaks.max()}]")
    if args.n is not None and dataset.frame_length != args.n:
        print(f"frame length mismatch: expected {args.n}", file=sys.stderr)
        return 2
    if args.labels is not None:
        found = int(np.unique(dataset.labels()).size) if dataset.labeled else 0
        if found != args.labels:
            print(f"label count mismatch: expected {args.labels}, found {found}",
                  file=sys.stderr)
            return 2
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cospike",
                     description="compressed spike sensing experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[], help="write a synthetic dataset")
    _add_config_flags(p)
    p.add_argument("out", help="output dataset path")
    p.add_argument("--format", default="csv", choices=("csv", "raw-binary"))
    p.set_defaults(handler=_cmd_synth)

    for name, handler, help_text in (
        ("train", _cmd_train, "fit the order-variance prior"),
        ("sweep", _cmd_sweep, "PRD sweep over measurement counts"),
        ("classify", _cmd_classify, "cluster reconstructed spikes"),
        ("co-sparsity", _cmd_co_sparsity, "co-sparsity curves and histograms"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_config_flags(p)
        p.set_defaults(handler=handler)

    p = sub.add_parser("convert-check", help="validate a converted dataset file")
    p.add_argument("dataset", help="dataset file to inspect")
    p.add_argument("--format", default="csv", choices=("csv", "raw-binary"))
    p.add_argument("--n", type=int, default=None, help="expected frame length")
    p.add_argument("--labels", type=int, default=None,
                   help="expected number of distinct labels")
    p.set_defaults(handler=_cmd_convert_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # _Parser routes usage errors through exit(1); --help exits 0
        return int(exc.code or 0)
    try:
        return args.handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (CospikeError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
