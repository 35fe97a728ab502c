"""Reconstruction quality metrics and the downstream classification probe.

Quality is measured per spike by the percentage root-mean-square difference
(PRD); a spike is counted as "good" when its PRD falls below 5 percent.  The
classification probe projects frames onto their leading principal components
and clusters them with a small self-contained k-means, then scores the labels
against ground truth by the best permutation matching.
"""

from __future__ import annotations

import itertools
import json
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ClusterCountError, ShapeError, ZeroReferenceError

GOOD_PRD_THRESHOLD = 5.0
# fractional-order coefficients are never exactly zero
DEFAULT_CO_SPARSITY_TOL = 1e-3
DEFAULT_NUM_FEATURES = 10
DEFAULT_KMEANS_RESTARTS = 10
_KMEANS_MAX_ITER = 300
_RANK_TOL = 1e-12


def prd(x: np.ndarray, x_hat: np.ndarray) -> float:
    """Percentage root-mean-square difference, 100 * ||x - x_hat|| / ||x||."""
    x = np.asarray(x, dtype=float)
    x_hat = np.asarray(x_hat, dtype=float)
    if x.shape != x_hat.shape:
        raise ShapeError(f"signal shapes differ: {x.shape} vs {x_hat.shape}")
    ref = np.linalg.norm(x)
    if ref == 0.0:
        raise ZeroReferenceError("PRD is undefined for a zero reference signal")
    return 100.0 * float(np.linalg.norm(x - x_hat)) / ref


def good_probability(prds, threshold: float = GOOD_PRD_THRESHOLD) -> float:
    """Percentage of PRD values strictly below the threshold."""
    vals = np.asarray(list(prds), dtype=float)
    if vals.size == 0:
        raise ValueError("good_probability needs at least one PRD value")
    return 100.0 * int(np.count_nonzero(vals < threshold)) / vals.size


def co_sparsity(z: np.ndarray, tol: float = DEFAULT_CO_SPARSITY_TOL) -> int:
    """Number of analysis coefficients with |z_i| <= tol * ||z||_inf.

    tol = 0 counts exact zeros.  The default treats everything three orders
    of magnitude below the largest coefficient as zero, since fractional
    difference coefficients decay without ever vanishing.
    """
    if tol < 0:
        raise ValueError(f"tolerance must be nonnegative, got {tol}")
    z = np.asarray(z, dtype=float).ravel()
    if z.size == 0:
        return 0
    mag = np.abs(z)
    return int(np.count_nonzero(mag <= tol * mag.max()))


# ---------------------------------------------------------------------------
# feature extraction


@dataclass(frozen=True)
class PCAModel:
    """Mean and top eigenvectors of the frame sample covariance."""

    mean: np.ndarray
    components: np.ndarray  # (num_components, n), rows orthonormal or zero
    eigenvalues: np.ndarray  # descending, length num_components
    rank: int

    def __post_init__(self):
        self.mean.setflags(write=False)
        self.components.setflags(write=False)
        self.eigenvalues.setflags(write=False)

    def transform(self, frames) -> np.ndarray:
        X = np.atleast_2d(np.asarray(frames, dtype=float))
        if X.shape[1] != self.mean.shape[0]:
            raise ShapeError(
                f"frame length {X.shape[1]} != fitted length {self.mean.shape[0]}"
            )
        return (X - self.mean) @ self.components.T

    def reconstruct(self, features) -> np.ndarray:
        F = np.atleast_2d(np.asarray(features, dtype=float))
        return self.mean + F @ self.components


def pca_fit(frames, num_components: int = DEFAULT_NUM_FEATURES) -> PCAModel:
    """Eigen-decompose the sample covariance and keep the top components.

    Components are signed so that each one's largest-magnitude loading is
    positive, which makes the decomposition reproducible across runs.
    Directions beyond the covariance rank are zeroed out (their features
    would carry no variance anyway) and a rank warning is issued.
    """
    X = np.asarray(frames, dtype=float)
    if X.ndim != 2:
        raise ShapeError(f"expected a 2-D frame array, got shape {X.shape}")
    count, n = X.shape
    if count < 2:
        raise ValueError("PCA needs at least two frames")
    if not 1 <= num_components <= n:
        raise ValueError(f"num_components must be in [1, {n}], got {num_components}")

    mean = X.mean(axis=0)
    centered = X - mean
    cov = (centered.T @ centered) / (count - 1)
    evals, evecs = np.linalg.eigh(cov)  # ascending
    order = np.argsort(evals)[::-1]
    evals = np.clip(evals[order], 0.0, None)
    evecs = evecs[:, order]

    rank = int(np.count_nonzero(evals > _RANK_TOL * max(evals[0], 1.0)))
    components = np.zeros((num_components, n))
    for j in range(min(num_components, rank)):
        v = evecs[:, j]
        peak = int(np.argmax(np.abs(v)))
        components[j] = v if v[peak] >= 0 else -v
    if rank < num_components:
        warnings.warn(
            f"covariance rank {rank} < requested {num_components} components; "
            "remaining features are zero-padded",
            RuntimeWarning,
            stacklevel=2,
        )
    return PCAModel(
        mean=mean,
        components=components,
        eigenvalues=evals[:num_components].copy(),
        rank=rank,
    )


def pca_features(frames, num_components: int = DEFAULT_NUM_FEATURES) -> np.ndarray:
    """Fit PCA on the frames and return their projected feature matrix."""
    model = pca_fit(frames, num_components)
    return model.transform(frames)


def _haar_matrix(n: int) -> np.ndarray:
    # orthonormal Haar basis by recursive averaging/differencing
    H = np.ones((1, 1))
    while H.shape[0] < n:
        top = np.kron(H, [1.0, 1.0])
        bottom = np.kron(np.eye(H.shape[0]), [1.0, -1.0])
        H = np.vstack([top, bottom]) / np.sqrt(2.0)
    return H


def haar_features(frames, num_components: int = DEFAULT_NUM_FEATURES) -> np.ndarray:
    """Alternative feature set: Haar coefficients with the largest variance.

    Frame length must be a power of two.  Coefficient positions are ranked
    by their variance across frames; ties break toward lower indices.
    """
    X = np.asarray(frames, dtype=float)
    if X.ndim != 2:
        raise ShapeError(f"expected a 2-D frame array, got shape {X.shape}")
    n = X.shape[1]
    if n & (n - 1) != 0:
        raise ShapeError(f"Haar transform needs a power-of-two length, got {n}")
    if not 1 <= num_components <= n:
        raise ValueError(f"num_components must be in [1, {n}], got {num_components}")
    coeffs = X @ _haar_matrix(n).T
    variances = coeffs.var(axis=0)
    keep = np.argsort(-variances, kind="stable")[:num_components]
    return coeffs[:, keep]


# ---------------------------------------------------------------------------
# clustering


def _kmeans_pp_init(features: np.ndarray, k: int, rng: np.random.Generator):
    # k-means++: spread initial centers by squared-distance sampling
    count = features.shape[0]
    centers = np.empty((k, features.shape[1]))
    centers[0] = features[rng.integers(count)]
    dist_sq = np.sum((features - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = dist_sq.sum()
        if total == 0.0:
            centers[j:] = features[rng.integers(count, size=k - j)]
            break
        idx = rng.choice(count, p=dist_sq / total)
        centers[j] = features[idx]
        dist_sq = np.minimum(dist_sq, np.sum((features - centers[j]) ** 2, axis=1))
    return centers


def _lloyd(features: np.ndarray, centers: np.ndarray):
    k = centers.shape[0]
    labels = np.full(features.shape[0], -1)
    for _ in range(_KMEANS_MAX_ITER):
        d = np.sum((features[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        new_labels = np.argmin(d, axis=1)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for j in range(k):
            members = features[labels == j]
            if members.size:
                centers[j] = members.mean(axis=0)
            else:
                # revive an empty cluster at the worst-fit point
                centers[j] = features[np.argmax(np.min(d, axis=1))]
    distortion = float(np.sum((features - centers[labels]) ** 2))
    return labels, distortion


def kmeans_classify(
    features,
    k: int,
    restarts: int = DEFAULT_KMEANS_RESTARTS,
    seed: int = 0,
) -> np.ndarray:
    """Best-of-restarts k-means labels, deterministic per seed.

    Each restart draws fresh k-means++ centers; the labeling with the lowest
    total squared distortion wins.  Multiple restarts matter in practice:
    single-start Lloyd regularly locks onto a split/merged configuration.
    """
    X = np.atleast_2d(np.asarray(features, dtype=float))
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    if k > X.shape[0]:
        raise ClusterCountError(f"k={k} exceeds the {X.shape[0]} available frames")
    if restarts < 1:
        raise ValueError(f"restarts must be at least 1, got {restarts}")

    rng = np.random.default_rng(seed)
    best_labels, best_distortion = None, np.inf
    for _ in range(restarts):
        centers = _kmeans_pp_init(X, k, rng)
        labels, distortion = _lloyd(X, centers)
        if distortion < best_distortion:
            best_labels, best_distortion = labels, distortion
    return best_labels


# ---------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class ReconstructionReport:
    """Distribution summary of per-spike PRD values."""

    count: int
    mean_prd: float
    good_probability: float
    q25: float
    median: float
    q75: float
    min_prd: float
    max_prd: float
    threshold: float = GOOD_PRD_THRESHOLD

    @classmethod
    def from_prds(cls, prds, threshold: float = GOOD_PRD_THRESHOLD):
        vals = np.asarray(list(prds), dtype=float)
        if vals.size == 0:
            raise ValueError("report needs at least one PRD value")
        q25, median, q75 = np.percentile(vals, [25.0, 50.0, 75.0])
        return cls(
            count=int(vals.size),
            mean_prd=float(vals.mean()),
            good_probability=good_probability(vals, threshold),
            q25=float(q25),
            median=float(median),
            q75=float(q75),
            min_prd=float(vals.min()),
            max_prd=float(vals.max()),
            threshold=threshold,
        )

    def to_json(self) -> str:
        return json.dumps(
            {
                "count": self.count,
                "mean_prd": self.mean_prd,
                "good_probability": self.good_probability,
                "quartiles": {"q25": self.q25, "median": self.median, "q75": self.q75},
                "min_prd": self.min_prd,
                "max_prd": self.max_prd,
                "threshold": self.threshold,
            },
            indent=2,
            sort_keys=True,
        )

    CSV_FIELDS = ("mean_prd", "good_probability", "q25", "median", "q75")

    def csv_values(self) -> tuple:
        return (self.mean_prd, self.good_probability, self.q25, self.median, self.q75)


@dataclass(frozen=True)
class ClassificationReport:
    """Permutation-matched clustering accuracy with its confusion matrix."""

    accuracy: float  # percent
    confusion: np.ndarray  # rows: true units, cols: predicted clusters
    true_labels: tuple
    predicted_labels: tuple
    assignment: tuple  # predicted column index -> true row index

    def __post_init__(self):
        self.confusion.setflags(write=False)

    def to_json(self) -> str:
        return json.dumps(
            {
                "accuracy": self.accuracy,
                "confusion": self.confusion.tolist(),
                "true_labels": list(self.true_labels),
                "predicted_labels": list(self.predicted_labels),
                "assignment": list(self.assignment),
            },
            indent=2,
            sort_keys=True,
        )


def classification_accuracy(predicted, truth) -> ClassificationReport:
    """Accuracy maximized over cluster-to-unit permutations (brute force).

    Cluster numbering is arbitrary, so the score is the best achievable
    after relabeling.  Exhaustive search over k! mappings; limited to
    k <= 6, which covers the few-unit recordings this toolkit targets.
    """
    pred = np.asarray(predicted).ravel()
    true = np.asarray(truth).ravel()
    if pred.shape != true.shape:
        raise ShapeError(f"label lengths differ: {pred.shape} vs {true.shape}")
    if pred.size == 0:
        raise ValueError("cannot score empty label arrays")

    true_values, true_idx = np.unique(true, return_inverse=True)
    pred_values, pred_idx = np.unique(pred, return_inverse=True)
    k = max(true_values.size, pred_values.size)
    if k > 6:
        raise ClusterCountError(
            f"permutation matching supports at most 6 clusters, got {k}"
        )

    confusion = np.zeros((true_values.size, pred_values.size), dtype=int)
    np.add.at(confusion, (true_idx, pred_idx), 1)

    # pad to square so unmatched clusters map to dummy units
    padded = np.zeros((k, k), dtype=int)
    padded[: confusion.shape[0], : confusion.shape[1]] = confusion
    best_hits, best_perm = -1, None
    for perm in itertools.permutations(range(k)):
        hits = int(padded[list(perm), range(k)].sum())
        if hits > best_hits:
            best_hits, best_perm = hits, perm
    return ClassificationReport(
        accuracy=100.0 * best_hits / pred.size,
        confusion=confusion,
        true_labels=tuple(true_values.tolist()),
        predicted_labels=tuple(pred_values.tolist()),
        assignment=tuple(best_perm),
    )
