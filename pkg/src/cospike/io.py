"""Plain-text serialization for matrices and per-spike measurement sets.

Matrix CSV: header line ``rows,cols``, then one row per line, comma-separated
floats in row-major order.  Measurement CSV: no header, one row per spike with
m values.  Floats are written with ``repr`` so a write/read round trip is
bit-exact.
"""

from __future__ import annotations

import os

import numpy as np

from .errors import ParseError


def _coerce_matrix(matrix) -> np.ndarray:
    # accept SensingMatrix / AnalysisDictionary wrappers as well as arrays
    for attr in ("entries", "matrix"):
        inner = getattr(matrix, attr, None)
        if inner is not None:
            matrix = inner
            break
    out = np.asarray(matrix, dtype=float)
    if out.ndim != 2:
        raise ParseError(f"expected a 2-D matrix, got shape {out.shape}")
    return out


def save_matrix(path: str | os.PathLike, matrix) -> None:
    """Write a matrix with its ``rows,cols`` header line."""
    m = _coerce_matrix(matrix)
    with open(path, "w") as fh:
        fh.write(f"{m.shape[0]},{m.shape[1]}\n")
        for row in m:
            fh.write(",".join(repr(float(v)) for v in row))
            fh.write("\n")


def load_matrix(path: str | os.PathLike) -> np.ndarray:
    with open(path) as fh:
        header = fh.readline().strip()
        try:
            rows_s, cols_s = header.split(",")
            rows, cols = int(rows_s), int(cols_s)
        except ValueError:
            raise ParseError(f"bad matrix header {header!r}, expected 'rows,cols'")
        out = np.empty((rows, cols))
        for i in range(rows):
            line = fh.readline()
            if not line:
                raise ParseError(f"{path}: matrix truncated at row {i} of {rows}")
            fields = line.strip().split(",")
            # header occupies line 1, so data row i sits on line i + 2
            if len(fields) != cols:
                raise ParseError(
                    f"{path}:{i + 2}: {len(fields)} fields, expected {cols}"
                )
            try:
                out[i] = [float(v) for v in fields]
            except ValueError as exc:
                raise ParseError(f"{path}:{i + 2}: {exc}")
    return out


def save_measurements(path: str | os.PathLike, measurements) -> None:
    """One CSV row per spike; row length is the measurement count m."""
    Y = np.atleast_2d(np.asarray(measurements, dtype=float))
    with open(path, "w") as fh:
        for row in Y:
            fh.write(",".join(repr(float(v)) for v in row))
            fh.write("\n")


def load_measurements(path: str | os.PathLike) -> np.ndarray:
    rows = []
    width = None
    with open(path) as fh:
        for i, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            fields = line.split(",")
            if width is None:
                width = len(fields)
            elif len(fields) != width:
                raise ParseError(
                    f"{path}:{i + 1}: {len(fields)} fields, expected {width}"
                )
            try:
                rows.append([float(v) for v in fields])
            except ValueError as exc:
                raise ParseError(f"{path}:{i + 1}: {exc}")
    if not rows:
        raise ParseError(f"no measurement rows in {path}")
    return np.asarray(rows)
