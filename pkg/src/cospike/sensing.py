"""Seeded Bernoulli sensing matrices and the noisy linear measurement model."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ShapeError


@dataclass(frozen=True)
class SensingMatrix:
    """m x n random +/- s operator; reproducible from (m, n, seed)."""

    entries: np.ndarray
    m: int
    n: int
    seed: int
    scale: float

    def __post_init__(self):
        self.entries.setflags(write=False)


@dataclass(frozen=True)
class MeasurementVector:
    values: np.ndarray
    noise_sigma: float
    seed: int

    def __post_init__(self):
        self.values.setflags(write=False)


def bernoulli_matrix(m: int, n: int, seed: int) -> SensingMatrix:
    """i.i.d. entries uniform over {+s, -s} with s = 1/sqrt(m).

    The scaling keeps Phi Phi^T ~ (n/m) I in expectation, so regularization
    tuning carries across measurement counts.  m > n is allowed (warns: the
    operator is no longer compressive).
    """
    if m <= 0:
        raise ShapeError(f"measurement count must be positive, got {m}")
    if n <= 0:
        raise ShapeError(f"frame length must be positive, got {n}")
    if m > n:
        warnings.warn(f"m={m} > n={n}: measurement is not compressive",
                      stacklevel=2)
    s = 1.0 / math.sqrt(m)
    rng = np.random.default_rng(seed)
    signs = rng.integers(0, 2, size=(m, n)) * 2 - 1
    return SensingMatrix(entries=s * signs, m=m, n=n, seed=seed, scale=s)


def measure(phi: SensingMatrix, x: np.ndarray, noise_sigma: float = 0.0,
            seed: int = 0) -> MeasurementVector:
    """y = Phi x + e with e ~ N(0, noise_sigma^2) i.i.d.

    noise_sigma = 0 returns exactly Phi x; the noise stream is seeded
    independently of the matrix so trials can vary either in isolation.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (phi.n,):
        raise ShapeError(f"signal shape {x.shape} incompatible with n={phi.n}")
    if noise_sigma < 0:
        raise ValueError(f"noise_sigma must be >= 0, got {noise_sigma}")
    y = phi.entries @ x
    if noise_sigma > 0:
        y = y + np.random.default_rng(seed).normal(0.0, noise_sigma, size=phi.m)
    return MeasurementVector(values=y, noise_sigma=noise_sigma, seed=seed)
