"""Independent reference implementations used to cross-check the package.

Nothing here imports from cospike's numerics beyond plain arrays: the
primal-dual solver, the objective evaluator, and the combinatorial helpers
are written from scratch so agreement is evidence, not tautology.
"""

from __future__ import annotations

import numpy as np


def weighted_objective(x, y, phi, omega, lam, weights=None) -> float:
    """0.5 * ||phi x - y||^2 + lam * sum_i w_i |(omega x)_i|."""
    x = np.asarray(x, dtype=float)
    w = np.ones(omega.shape[0]) if weights is None else np.asarray(weights, float)
    residual = phi @ x - y
    return 0.5 * float(residual @ residual) + lam * float(w @ np.abs(omega @ x))


def chambolle_pock(y, phi, omega, lam, weights=None, iterations=100_000):
    """Primal-dual (PDHG) reference solver for the same composite objective.

    Splitting: K = [phi; omega], dual block p for the quadratic data term
    (prox of its conjugate is (p + sigma*(phi x - y)) / (1 + sigma)), dual
    block q for the weighted l1 term (prox of its conjugate is projection
    onto the box [-lam*w, lam*w]).  Step sizes tau = sigma = 0.99 / ||K||.
    """
    phi = np.asarray(phi, dtype=float)
    omega = np.asarray(omega, dtype=float)
    y = np.asarray(y, dtype=float)
    n = phi.shape[1]
    w = np.ones(omega.shape[0]) if weights is None else np.asarray(weights, float)

    K = np.vstack([phi, omega])
    step = 0.99 / np.linalg.norm(K, 2)
    tau = sigma = step

    x = np.zeros(n)
    x_bar = np.zeros(n)
    p = np.zeros(phi.shape[0])
    q = np.zeros(omega.shape[0])
    box = lam * w
    for _ in range(iterations):
        p = (p + sigma * (phi @ x_bar - y)) / (1.0 + sigma)
        q = np.clip(q + sigma * (omega @ x_bar), -box, box)
        x_new = x - tau * (phi.T @ p + omega.T @ q)
        x_bar = 2.0 * x_new - x
        x = x_new
    return x


def binomial_fod_coefficients(f, length: int):
    """FOD coefficients through sympy's exact generalized binomial.

    c_k = (-1)^k * binomial(f, k) with f possibly non-integer; evaluated
    symbolically and converted to float at the end.
    """
    import sympy

    fs = sympy.nsimplify(f, rational=True)
    return np.array(
        [float((-1) ** k * sympy.binomial(fs, k)) for k in range(length)]
    )


def hungarian_accuracy(predicted, truth) -> float:
    """Permutation-matched accuracy via scipy's assignment solver (percent)."""
    from scipy.optimize import linear_sum_assignment

    predicted = np.asarray(predicted).ravel()
    truth = np.asarray(truth).ravel()
    t_vals, t_idx = np.unique(truth, return_inverse=True)
    p_vals, p_idx = np.unique(predicted, return_inverse=True)
    k = max(t_vals.size, p_vals.size)
    confusion = np.zeros((k, k))
    np.add.at(confusion, (t_idx, p_idx), 1)
    rows, cols = linear_sum_assignment(-confusion)
    return 100.0 * float(confusion[rows, cols].sum()) / predicted.size
