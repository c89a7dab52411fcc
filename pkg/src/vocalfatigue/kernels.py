"""Hot numeric kernels: numba-compiled loops with pure-numpy fallbacks.

The SMO inner loop and the t-SNE bisection/gradient dominate runtime, so
they exist twice: an ``@njit`` version and a vectorized numpy version with
identical semantics.  Selection happens once at import time:

    VOCALFATIGUE_NUMBA=0   forces the numpy path

and the numpy path is also used when numba is not importable.  Both paths
follow the same floating-point operation order where practical; remaining
differences are at roundoff level.  ``benchmarks/bench_kernels.py``
compares the two.
"""

from __future__ import annotations

import os

import numpy as np

NUMBA_REQUESTED = os.environ.get("VOCALFATIGUE_NUMBA", "1") != "0"

if NUMBA_REQUESTED:
    try:
        from numba import njit

        HAVE_NUMBA = True
    except ImportError:
        HAVE_NUMBA = False
else:
    HAVE_NUMBA = False

USE_NUMBA = NUMBA_REQUESTED and HAVE_NUMBA

if not USE_NUMBA:

    def njit(*args, **kwargs):
        """No-op decorator so both paths share one source shape."""
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap


# ---------------------------------------------------------------------------
# SMO solver for the RBF-SVM dual
#
# Maximal-violating-pair selection (first-order KKT violation).  With
# v_t = y_t - fhat_t, a feasible bias must satisfy b >= v_t on the "up" set
# and b <= v_t on the "low" set; the duality gap proxy is
# max_up(v) - min_low(v) and the solver stops when it drops below tol.
#
# Updated alphas are snapped to exact bound values within a relative
# epsilon: pair arithmetic otherwise leaves "dust" one ulp off a bound,
# which keeps a variable in a selection set it has no room to move in and
# stalls the solver.  Snap distances are ulp-scale, so the equality
# constraint drifts far below its 1e-8 budget.

_ETA_FLOOR = 1e-12
_SNAP_EPS = 1e-12


def _smo_loop(K, y, c, tol, max_steps):
    m = K.shape[0]
    alpha = np.zeros(m)
    fhat = np.zeros(m)
    steps = 0
    best_up = 1.0
    best_lo = -1.0
    snap = _SNAP_EPS * c
    while steps < max_steps:
        i = -1
        j = -1
        best_up = -np.inf
        best_lo = np.inf
        for t in range(m):
            v = y[t] - fhat[t]
            if (y[t] > 0.0 and alpha[t] < c) or (y[t] < 0.0 and alpha[t] > 0.0):
                if v > best_up:
                    best_up = v
                    i = t
            if (y[t] > 0.0 and alpha[t] > 0.0) or (y[t] < 0.0 and alpha[t] < c):
                if v < best_lo:
                    best_lo = v
                    j = t
        if best_up - best_lo < tol:
            break
        s = y[i] * y[j]
        if s < 0.0:
            lo_clip = max(0.0, alpha[j] - alpha[i])
            hi_clip = min(c, c + alpha[j] - alpha[i])
        else:
            lo_clip = max(0.0, alpha[i] + alpha[j] - c)
            hi_clip = min(c, alpha[i] + alpha[j])
        eta = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if eta < _ETA_FLOOR:
            eta = _ETA_FLOOR
        aj = alpha[j] + y[j] * ((fhat[i] - y[i]) - (fhat[j] - y[j])) / eta
        if aj < lo_clip:
            aj = lo_clip
        elif aj > hi_clip:
            aj = hi_clip
        if aj < snap:
            aj = 0.0
        elif aj > c - snap:
            aj = c
        d_j = aj - alpha[j]
        ai = alpha[i] - s * d_j
        if ai < snap:
            ai = 0.0
        elif ai > c - snap:
            ai = c
        d_i = ai - alpha[i]
        if d_i == 0.0 and d_j == 0.0:
            break
        alpha[i] = ai
        alpha[j] = aj
        coef_i = y[i] * d_i
        coef_j = y[j] * d_j
        for t in range(m):
            fhat[t] += coef_i * K[i, t] + coef_j * K[j, t]
        steps += 1
    gap = best_up - best_lo
    return alpha, fhat, gap, steps


_smo_loop_numba = njit(cache=True)(_smo_loop) if USE_NUMBA else None


def _smo_loop_numpy(K, y, c, tol, max_steps):
    m = K.shape[0]
    alpha = np.zeros(m)
    fhat = np.zeros(m)
    steps = 0
    best_up = 1.0
    best_lo = -1.0
    snap = _SNAP_EPS * c
    pos = y > 0.0
    while steps < max_steps:
        v = y - fhat
        up = (pos & (alpha < c)) | (~pos & (alpha > 0.0))
        low = (pos & (alpha > 0.0)) | (~pos & (alpha < c))
        i = int(np.argmax(np.where(up, v, -np.inf)))
        j = int(np.argmin(np.where(low, v, np.inf)))
        best_up = v[i]
        best_lo = v[j]
        if best_up - best_lo < tol:
            break
        s = y[i] * y[j]
        if s < 0.0:
            lo_clip = max(0.0, alpha[j] - alpha[i])
            hi_clip = min(c, c + alpha[j] - alpha[i])
        else:
            lo_clip = max(0.0, alpha[i] + alpha[j] - c)
            hi_clip = min(c, alpha[i] + alpha[j])
        eta = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if eta < _ETA_FLOOR:
            eta = _ETA_FLOOR
        aj = alpha[j] + y[j] * ((fhat[i] - y[i]) - (fhat[j] - y[j])) / eta
        aj = min(max(aj, lo_clip), hi_clip)
        if aj < snap:
            aj = 0.0
        elif aj > c - snap:
            aj = c
        d_j = aj - alpha[j]
        ai = alpha[i] - s * d_j
        if ai < snap:
            ai = 0.0
        elif ai > c - snap:
            ai = c
        d_i = ai - alpha[i]
        if d_i == 0.0 and d_j == 0.0:
            break
        alpha[i] = ai
        alpha[j] = aj
        fhat += (y[i] * d_i) * K[i] + (y[j] * d_j) * K[j]
        steps += 1
    gap = best_up - best_lo
    return alpha, fhat, gap, steps


def smo_solve(K, y, c, tol, max_steps, use_numba=None):
    """Solve the soft-margin RBF-SVM dual on a precomputed kernel matrix.

    Returns (alpha, bias, gap, steps, converged).  The bias is the mean of
    y - fhat over free support vectors, or the midpoint of the feasible
    interval when none are free.
    """
    K = np.ascontiguousarray(K, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if use_numba is None:
        use_numba = USE_NUMBA
    loop = _smo_loop_numba if use_numba and _smo_loop_numba is not None else _smo_loop_numpy
    alpha, fhat, gap, steps = loop(K, y, float(c), float(tol), int(max_steps))
    free = (alpha > 0.0) & (alpha < c)
    v = y - fhat
    if free.any():
        bias = float(v[free].mean())
    else:
        up = ((y > 0) & (alpha < c)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < c))
        hi = v[up].max() if up.any() else 0.0
        lo = v[low].min() if low.any() else 0.0
        bias = float((hi + lo) / 2.0)
    return alpha, bias, float(gap), int(steps), bool(gap < tol)


# ---------------------------------------------------------------------------
# t-SNE: per-point bandwidth calibration and KL gradient

_BISECT_STEPS = 200


def _perplexity_search(d2, target_entropy_nats, entropy_tol_nats):
    """Per-row precision betas and conditional probabilities.

    Bisection on beta (= 1/(2 sigma^2)); entropy decreases monotonically
    in beta.  Distances are shifted by the row minimum before
    exponentiation, which changes neither P nor the entropy.
    """
    n = d2.shape[0]
    p = np.zeros((n, n))
    betas = np.zeros(n)
    for i in range(n):
        dmin = np.inf
        for t in range(n):
            if t != i and d2[i, t] < dmin:
                dmin = d2[i, t]
        beta = 1.0
        lo = 0.0
        hi = np.inf
        row = np.zeros(n)
        for _ in range(_BISECT_STEPS):
            z = 0.0
            mean_e = 0.0
            for t in range(n):
                if t == i:
                    row[t] = 0.0
                else:
                    e = d2[i, t] - dmin
                    w = np.exp(-beta * e)
                    row[t] = w
                    z += w
                    mean_e += w * e
            entropy = np.log(z) + beta * mean_e / z
            if abs(entropy - target_entropy_nats) < entropy_tol_nats:
                break
            if entropy > target_entropy_nats:
                lo = beta
                beta = beta * 2.0 if hi == np.inf else (lo + hi) / 2.0
            else:
                hi = beta
                beta = (lo + hi) / 2.0
        z = 0.0
        for t in range(n):
            z += row[t]
        for t in range(n):
            p[i, t] = row[t] / z
        betas[i] = beta
    return p, betas


_perplexity_search_numba = njit(cache=True)(_perplexity_search) if USE_NUMBA else None


def _perplexity_search_numpy(d2, target_entropy_nats, entropy_tol_nats):
    n = d2.shape[0]
    p = np.zeros((n, n))
    betas = np.zeros(n)
    off_diag = ~np.eye(n, dtype=bool)
    for i in range(n):
        e = d2[i].copy()
        e[i] = np.inf
        e -= e.min()
        e[i] = 0.0
        mask = off_diag[i]
        beta = 1.0
        lo = 0.0
        hi = np.inf
        row = np.zeros(n)
        for _ in range(_BISECT_STEPS):
            row = np.where(mask, np.exp(-beta * e), 0.0)
            z = row.sum()
            entropy = np.log(z) + beta * float((row * e).sum()) / z
            if abs(entropy - target_entropy_nats) < entropy_tol_nats:
                break
            if entropy > target_entropy_nats:
                lo = beta
                beta = beta * 2.0 if hi == np.inf else (lo + hi) / 2.0
            else:
                hi = beta
                beta = (lo + hi) / 2.0
        p[i] = row / row.sum()
        betas[i] = beta
    return p, betas


def perplexity_calibrate(d2, perplexity, use_numba=None):
    """Conditional probability rows with entropy matched to log2(perplexity)."""
    d2 = np.ascontiguousarray(d2, dtype=np.float64)
    target = float(np.log(perplexity))
    tol = 1e-7
    if use_numba is None:
        use_numba = USE_NUMBA
    if use_numba and _perplexity_search_numba is not None:
        return _perplexity_search_numba(d2, target, tol)
    return _perplexity_search_numpy(d2, target, tol)


def _kl_gradient(p, yemb):
    """KL(P || Q) and its gradient for a Student-t (1 dof) map."""
    n, dim = yemb.shape
    qtilde = np.zeros((n, n))
    z = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            d2 = 0.0
            for k in range(dim):
                diff = yemb[i, k] - yemb[j, k]
                d2 += diff * diff
            q = 1.0 / (1.0 + d2)
            qtilde[i, j] = q
            qtilde[j, i] = q
            z += 2.0 * q
    grad = np.zeros((n, dim))
    kl = 0.0
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            pij = p[i, j]
            coef = 4.0 * (pij - qtilde[i, j] / z) * qtilde[i, j]
            for k in range(dim):
                grad[i, k] += coef * (yemb[i, k] - yemb[j, k])
            if pij > 0.0:
                kl += pij * np.log(pij * z / qtilde[i, j])
    return grad, kl


_kl_gradient_numba = njit(cache=True)(_kl_gradient) if USE_NUMBA else None


def _kl_gradient_numpy(p, yemb):
    n = yemb.shape[0]
    d2 = np.square(yemb[:, None, :] - yemb[None, :, :]).sum(axis=2)
    qtilde = 1.0 / (1.0 + d2)
    np.fill_diagonal(qtilde, 0.0)
    z = qtilde.sum()
    coef = 4.0 * (p - qtilde / z) * qtilde
    grad = coef.sum(axis=1)[:, None] * yemb - coef @ yemb
    mask = p > 0.0
    kl = float((p[mask] * np.log(p[mask] * z / qtilde[mask])).sum())
    return grad, kl


def kl_gradient(p, yemb, use_numba=None):
    """Gradient of KL(P || Q) with respect to the embedding, plus the KL value."""
    p = np.ascontiguousarray(p, dtype=np.float64)
    yemb = np.ascontiguousarray(yemb, dtype=np.float64)
    if use_numba is None:
        use_numba = USE_NUMBA
    if use_numba and _kl_gradient_numba is not None:
        return _kl_gradient_numba(p, yemb)
    return _kl_gradient_numpy(p, yemb)


def squared_distances(x) -> np.ndarray:
    """Pairwise squared Euclidean distances via the Gram expansion."""
    x = np.asarray(x, dtype=np.float64)
    sq = np.einsum("ij,ij->i", x, x)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    return d2
