"""Command-line converter: MATLAB container in, spike dataset out.

Exit codes: 0 success, 1 bad arguments, 2 conversion failure.
"""

from __future__ import annotations

import argparse
import sys

from .convert import (
    DEFAULT_FRAME_LENGTH,
    DEFAULT_PRE_PEAK,
    ConversionJob,
    MissingVariableError,
    convert,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spikeconv",
        description="convert a MATLAB spike recording to a frame dataset")
    parser.add_argument("input", help="MATLAB container file")
    parser.add_argument("output", help="output dataset path")
    parser.add_argument("--n", type=int, default=DEFAULT_FRAME_LENGTH,
                        help="frame length in samples")
    parser.add_argument("--pre-peak", type=int, default=DEFAULT_PRE_PEAK,
                        help="peak position inside each frame")
    parser.add_argument("--format", default="csv",
                        choices=("csv", "raw-binary"))
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code else 0
    job = ConversionJob(input_path=args.input, output_path=args.output,
                        frame_length=args.n, pre_peak=args.pre_peak,
                        output_format=args.format)
    try:
        job.validate()
    except ValueError as exc:
        print(f"bad arguments: {exc}", file=sys.stderr)
        return 1
    try:
        summary = convert(job)
    except (MissingVariableError, ValueError, OSError) as exc:
        # KeyError reprs its message; unwrap for readability
        message = exc.args[0] if exc.args else str(exc)
        print(f"conversion failed: {message}", file=sys.stderr)
        return 2
    print(summary.describe())
    return 0


if __name__ == "__main__":
    sys.exit(main())
