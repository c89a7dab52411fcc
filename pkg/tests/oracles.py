"""Independent brute-force oracles used by the test suite.

These deliberately avoid the code paths they check: the QP oracle
enumerates active-set patterns of the SVM dual instead of running SMO, and
the silhouette is a direct O(N^2) loop.
"""

import itertools

import numpy as np


def dual_objective(alpha, y, kmat):
    """W(alpha) = sum(alpha) - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij."""
    ay = alpha * y
    return float(alpha.sum() - 0.5 * ay @ kmat @ ay)


def qp_oracle(kmat, y, c, feas_tol=1e-9):
    """Exact maximum of the SVM dual by enumerating bound patterns.

    Each alpha is assigned lower bound (0), upper bound (C), or free; free
    values and the equality multiplier come from the KKT linear system.
    Every feasible candidate bounds the optimum from below and the optimal
    pattern reproduces it exactly, so the max over candidates is the
    optimum.  Exponential in M; use only for M <= 6.
    """
    m = len(y)
    q = np.outer(y, y) * kmat
    best = -np.inf
    best_alpha = None
    for pattern in itertools.product((0, 1, 2), repeat=m):
        pattern = np.array(pattern)
        alpha = np.zeros(m)
        alpha[pattern == 1] = c
        free = np.flatnonzero(pattern == 2)
        bound = np.flatnonzero(pattern != 2)
        if free.size:
            nf = free.size
            a = np.zeros((nf + 1, nf + 1))
            a[:nf, :nf] = q[np.ix_(free, free)]
            a[:nf, nf] = y[free]
            a[nf, :nf] = y[free]
            rhs = np.zeros(nf + 1)
            rhs[:nf] = 1.0 - q[np.ix_(free, bound)] @ alpha[bound]
            rhs[nf] = -float(y[bound] @ alpha[bound])
            try:
                sol, *_ = np.linalg.lstsq(a, rhs, rcond=None)
            except np.linalg.LinAlgError:
                continue
            if not np.all(np.isfinite(sol)):
                continue
            # Keep only consistent solutions of the KKT system.
            if np.abs(a @ sol - rhs).max() > 1e-7:
                continue
            alpha[free] = sol[:nf]
        if np.any(alpha < -feas_tol) or np.any(alpha > c + feas_tol):
            continue
        if abs(float(alpha @ y)) > 1e-7:
            continue
        value = dual_objective(np.clip(alpha, 0.0, c), y, kmat)
        if value > best:
            best = value
            best_alpha = np.clip(alpha, 0.0, c)
    return best, best_alpha


def silhouette(points, labels):
    """Mean silhouette coefficient with Euclidean distances."""
    points = np.asarray(points, dtype=np.float64)
    labels = np.asarray(labels)
    dists = np.sqrt(np.maximum(
        np.square(points[:, None, :] - points[None, :, :]).sum(axis=2), 0.0
    ))
    scores = []
    for i in range(points.shape[0]):
        same = labels == labels[i]
        same[i] = False
        if not same.any():
            continue
        a = dists[i, same].mean()
        b = min(
            dists[i, labels == other].mean()
            for other in np.unique(labels)
            if other != labels[i]
        )
        scores.append((b - a) / max(a, b))
    return float(np.mean(scores))
