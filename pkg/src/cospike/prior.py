"""Training stage: Laplacian scale estimates per difference order, the
log-quadratic variance law across orders, and the grouped weight vector.

Analysis coefficients of a fixed order are modeled as i.i.d. Laplacian.
Their variance as a function of the order f follows

    sigma^2(f) = c * 2^(-2*a*f^2 - 2*b*f),

which is linear in (a, b, log2 c) after taking log2, so a plain least-squares
fit recovers the parameters.  Weights are the inverse deviations 1/sigma(f),
constant within each order block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateSigmaError, ShapeError, UnderdeterminedFitError
from .fracdiff import difference_matrix

DEFAULT_CLIP_RATIO = 1e4


@dataclass(frozen=True)
class OrderVarianceModel:
    """Fitted (a, b, c) of the variance law plus the raw per-order estimates."""

    a: float
    b: float
    c: float
    per_order_sigma: tuple[tuple[float, float], ...]
    residual: float

    def predict_sigma(self, f: float) -> float:
        """Model standard deviation at order f (always positive)."""
        return math.sqrt(self.c) * 2.0 ** (-self.a * f * f - self.b * f)


@dataclass(frozen=True)
class WeightVector:
    """Positive per-row weights, constant within each order block."""

    values: np.ndarray
    orders: tuple[float, ...]
    frame_length: int

    def __post_init__(self):
        self.values.setflags(write=False)

    def group(self, i: int) -> np.ndarray:
        n = self.frame_length
        return self.values[i * n:(i + 1) * n]


def estimate_order_sigma(training_frames, order: float) -> float:
    """Laplacian ML standard deviation of pooled order-``order`` coefficients.

    The ML scale of a Laplacian is the mean absolute value, and
    sigma = sqrt(2) * scale.  Coefficients are pooled across all frames and
    all positions.
    """
    frames = np.atleast_2d(np.asarray(training_frames, dtype=float))
    if frames.size == 0:
        raise ShapeError("need at least one training frame")
    d = difference_matrix(order, frames.shape[1])
    coeffs = frames @ d.T
    mean_abs = float(np.mean(np.abs(coeffs)))
    if mean_abs == 0.0:
        raise DegenerateSigmaError(
            f"all order-{order} coefficients are zero; sigma is undefined")
    return math.sqrt(2.0) * mean_abs


def fit_variance_model(points) -> OrderVarianceModel:
    """Least-squares fit of log2 sigma^2 = log2 c - 2a f^2 - 2b f.

    ``points`` is a sequence of (order, sigma) pairs; at least three distinct
    orders are needed for the three unknowns.
    """
    points = [(float(f), float(s)) for f, s in points]
    orders = np.array([f for f, _ in points])
    sigmas = np.array([s for _, s in points])
    if len(set(orders.tolist())) < 3:
        raise UnderdeterminedFitError(
            f"need >= 3 distinct orders, got {sorted(set(orders.tolist()))}")
    if np.any(sigmas <= 0):
        raise DegenerateSigmaError("sigma estimates must be positive")
    design = np.column_stack([-2.0 * orders ** 2, -2.0 * orders,
                              np.ones_like(orders)])
    target = np.log2(sigmas ** 2)
    if np.linalg.matrix_rank(design) < 3:
        raise UnderdeterminedFitError("collinear orders: design is rank deficient")
    sol, _, _, _ = np.linalg.lstsq(design, target, rcond=None)
    a, b, log2_c = (float(v) for v in sol)
    residual = float(np.sqrt(np.mean((design @ sol - target) ** 2)))
    return OrderVarianceModel(a=a, b=b, c=2.0 ** log2_c,
                              per_order_sigma=tuple(points), residual=residual)


def build_weights(model: OrderVarianceModel, orders, n: int,
                  clip_ratio: float = DEFAULT_CLIP_RATIO) -> WeightVector:
    """Grouped weight vector w_{G_i} = 1/sigma(f_i), n copies per order.

    Weights are clipped from above so max/min <= clip_ratio; otherwise a
    near-zero sigma estimate for one order would make the convex program
    arbitrarily ill-conditioned.
    """
    orders = tuple(float(f) for f in orders)
    if not orders:
        raise ShapeError("order set must not be empty")
    if clip_ratio <= 0:
        raise ValueError(f"clip_ratio must be positive, got {clip_ratio}")
    for name, v in (("a", model.a), ("b", model.b), ("c", model.c)):
        if not math.isfinite(v):
            raise ValueError(f"model parameter {name} is not finite: {v}")
    group_w = np.array([2.0 ** (model.a * f * f + model.b * f) / math.sqrt(model.c)
                        for f in orders])
    group_w = np.minimum(group_w, group_w.min() * clip_ratio)
    values = np.repeat(group_w, n)
    return WeightVector(values=values, orders=orders, frame_length=n)


def save_model(model: OrderVarianceModel, path) -> None:
    """Write the model as a flat key = value record (round-trips exactly)."""
    lines = [
        f"a = {model.a!r}",
        f"b = {model.b!r}",
        f"c = {model.c!r}",
        f"residual = {model.residual!r}",
        "orders = " + ",".join(repr(f) for f, _ in model.per_order_sigma),
        "sigmas = " + ",".join(repr(s) for _, s in model.per_order_sigma),
    ]
    Path(path).write_text("\n".join(lines) + "\n")


def load_model(path) -> OrderVarianceModel:
    record: dict[str, str] = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        record[key.strip()] = value.strip()
    orders = [float(v) for v in record["orders"].split(",")]
    sigmas = [float(v) for v in record["sigmas"].split(",")]
    return OrderVarianceModel(
        a=float(record["a"]), b=float(record["b"]), c=float(record["c"]),
        per_order_sigma=tuple(zip(orders, sigmas)),
        residual=float(record["residual"]))
