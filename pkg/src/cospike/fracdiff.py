"""Fractional-order difference operators and stacked analysis dictionaries.

A difference operator of real order ``f`` is the truncated power series of
(1 - z)^f.  Its matrix form is upper-triangular Toeplitz with unit diagonal,
so every single-order block is invertible and blocks of different orders
commute and compose additively in the order (semigroup property).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import toeplitz

from .errors import InvalidOrderError, InvalidOrderSetError, ShapeError

# Advisory band for the maximum pairwise order gap: a compromise between
# coefficient sparsity (small gaps) and inter-block coherence (large gaps).
RECOMMENDED_ORDER_DISTANCE = (0.25, 0.5)


@dataclass(frozen=True)
class DifferenceCoefficients:
    """Leading coefficients c_0..c_{K-1} of the order-``order`` difference."""

    order: float
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs.setflags(write=False)

    def __len__(self) -> int:
        return len(self.coeffs)


@dataclass(frozen=True)
class AnalysisDictionary:
    """Stacked l x n analysis operator with its construction metadata.

    For multi-order dictionaries ``orders`` holds the q difference orders and
    ``matrix`` stacks the q difference matrices scaled by 1/sqrt(q).  Random
    tight frames keep ``orders`` empty.
    """

    matrix: np.ndarray
    frame_length: int
    orders: tuple[float, ...] = ()
    scale: float = 1.0
    name: str = field(default="", compare=False)

    def __post_init__(self):
        self.matrix.setflags(write=False)

    @property
    def rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def redundancy(self) -> float:
        return self.rows / self.frame_length

    def block(self, i: int) -> np.ndarray:
        """The i-th n x n row block (scaling included)."""
        n = self.frame_length
        return self.matrix[i * n:(i + 1) * n]


@dataclass(frozen=True)
class OrderDistanceReport:
    max_distance: float
    within_recommended: bool


def _check_order(f) -> float:
    f = float(f)
    if not math.isfinite(f) or f < 0:
        raise InvalidOrderError(f"difference order must be finite and >= 0, got {f}")
    return f


def fod_coefficients(f: float, length: int) -> DifferenceCoefficients:
    """Coefficients of the order-``f`` difference, c_0..c_{length-1}.

    Computed by the multiplicative recurrence c_{k+1} = c_k * (k - f) / (k + 1),
    which is stable for any length; the gamma-quotient closed form overflows
    beyond k ~ 170.  For integer f the sequence terminates: c_k = 0 for k > f.
    """
    f = _check_order(f)
    if length < 1:
        raise ShapeError(f"length must be >= 1, got {length}")
    c = np.empty(length)
    c[0] = 1.0
    for k in range(length - 1):
        c[k + 1] = c[k] * (k - f) / (k + 1)
    return DifferenceCoefficients(order=f, coeffs=c)


def difference_matrix(f: float, n: int) -> np.ndarray:
    """n x n difference matrix of order ``f``.

    Upper-triangular Toeplitz: row i carries c_0..c_{n-1-i} in columns i..n-1.
    Rows near the frame end are truncated rather than padded or wrapped, which
    keeps the matrix unit-triangular (hence invertible) and preserves the exact
    semigroup identity D^a D^b = D^{a+b}.
    """
    coeffs = fod_coefficients(f, n).coeffs
    first_col = np.zeros(n)
    first_col[0] = coeffs[0]
    return toeplitz(first_col, coeffs)


def build_mfod(orders, n: int) -> AnalysisDictionary:
    """Stack one difference matrix per order, scaled by 1/sqrt(q).

    Order sequence is preserved so that weight groups built elsewhere align
    with the row blocks.
    """
    orders = tuple(_check_order(f) for f in orders)
    if not orders:
        raise InvalidOrderSetError("order set must not be empty")
    if len(set(orders)) != len(orders):
        raise InvalidOrderSetError(f"duplicate orders in {orders}")
    q = len(orders)
    scale = 1.0 / math.sqrt(q)
    matrix = np.vstack([scale * difference_matrix(f, n) for f in orders])
    name = "mfod{" + ",".join(format(f, "g") for f in orders) + "}"
    return AnalysisDictionary(matrix=matrix, frame_length=n, orders=orders,
                              scale=scale, name=name)


def order_distance(orders) -> OrderDistanceReport:
    """Maximum pairwise gap between orders; advisory only.

    Singleton sets report 0 by convention, which falls outside the
    recommended band.
    """
    orders = [_check_order(f) for f in orders]
    if not orders:
        raise InvalidOrderSetError("order set must not be empty")
    d = max(orders) - min(orders) if len(orders) > 1 else 0.0
    lo, hi = RECOMMENDED_ORDER_DISTANCE
    return OrderDistanceReport(max_distance=d, within_recommended=lo <= d <= hi)


def build_random_tight_frame(l: int, n: int, seed: int) -> AnalysisDictionary:
    """l x n tight frame with Omega^T Omega = (l/n) * I, deterministic per seed.

    Baseline dictionary for experiments: orthonormal columns from the QR of a
    Gaussian matrix, rescaled so the frame has the same total energy as an
    l/n-redundant difference stack.
    """
    if l < n:
        raise ShapeError(f"tight frame needs l >= n, got l={l}, n={n}")
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((l, n))
    q, r = np.linalg.qr(g, mode="reduced")
    # Fix the QR sign ambiguity so the result is a pure function of the seed.
    q = q * np.sign(np.diag(r))
    matrix = math.sqrt(l / n) * q
    return AnalysisDictionary(matrix=matrix, frame_length=n, orders=(),
                              scale=math.sqrt(l / n), name=f"rtf{l}x{n}")


def apply_analysis(dictionary: AnalysisDictionary, x: np.ndarray) -> np.ndarray:
    """Analysis coefficients z = Omega x."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != dictionary.frame_length:
        raise ShapeError(
            f"frame length {x.shape[-1]} != dictionary frame length "
            f"{dictionary.frame_length}")
    return dictionary.matrix @ x if x.ndim == 1 else x @ dictionary.matrix.T
