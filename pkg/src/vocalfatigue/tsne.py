"""Exact t-SNE projection to low dimensions for visualization exports.

Per-point bandwidths are bisected until the conditional distribution's
perplexity matches the target; the joint P is the symmetrized, normalized
average of the conditionals.  Optimization is plain momentum gradient
descent on KL(P || Q) with a Student-t (1 dof) low-dimensional kernel,
early exaggeration for the first 250 iterations, and explicit recentering
after every step.  Everything is deterministic given the seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InvalidValue, PerplexityTooLarge, TooFewPoints
from .pca import fit_pca, pca_transform

EXAGGERATION_ITERS = 250
MOMENTUM_EARLY = 0.5
MOMENTUM_LATE = 0.8
INIT_SCALE = 1e-4
JITTER_SCALE = 1e-6


@dataclass(frozen=True)
class TsneConfig:
    perplexity: float = 30.0
    out_dims: int = 2
    iterations: int = 1000
    learning_rate: float = 200.0
    early_exaggeration: float = 12.0
    seed: int = 0

    def __post_init__(self):
        for name in ("perplexity", "learning_rate", "early_exaggeration"):
            if getattr(self, name) <= 0:
                raise InvalidValue(f"{name} must be positive")
        if self.out_dims < 1 or self.iterations < 1:
            raise InvalidValue("out_dims and iterations must be >= 1")

    def validate_for(self, n_points: int) -> None:
        if n_points < 4:
            raise TooFewPoints(f"t-SNE needs >= 4 points, got {n_points}")
        if not self.perplexity < (n_points - 1) / 3:
            raise PerplexityTooLarge(
                f"perplexity {self.perplexity} needs > {3 * self.perplexity + 1:.0f} points, "
                f"got {n_points}"
            )


def joint_probabilities(x, perplexity: float, use_numba=None) -> np.ndarray:
    """Symmetrized joint P with zero diagonal and total mass 1."""
    d2 = kernels.squared_distances(x)
    cond, _betas = kernels.perplexity_calibrate(d2, perplexity, use_numba=use_numba)
    n = d2.shape[0]
    p = (cond + cond.T) / (2.0 * n)
    np.fill_diagonal(p, 0.0)
    return p


def _initial_embedding(x, cfg: TsneConfig) -> np.ndarray:
    """PCA coordinates scaled to std 1e-4 plus tiny seeded jitter."""
    x = np.asarray(x, dtype=np.float64)
    k = min(cfg.out_dims, min(x.shape))
    model = fit_pca(x, k)
    y0 = np.zeros((x.shape[0], cfg.out_dims))
    y0[:, :k] = pca_transform(model, x)
    lead_std = y0[:, 0].std()
    if lead_std > 0:
        y0 *= INIT_SCALE / lead_std
    rng = np.random.default_rng(cfg.seed)
    y0 += rng.normal(0.0, JITTER_SCALE, size=y0.shape)
    return y0


def tsne_project(x, cfg: TsneConfig) -> np.ndarray:
    """Project rows of x to cfg.out_dims dimensions.

    The result is recentered after every iteration; the final KL is
    asserted against the initial KL in the test suite rather than here.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise InvalidValue(f"x must be 2-D, got shape {x.shape}")
    cfg.validate_for(x.shape[0])

    p = joint_probabilities(x, cfg.perplexity)
    y = _initial_embedding(x, cfg)
    y -= y.mean(axis=0)
    velocity = np.zeros_like(y)

    p_eff = p * cfg.early_exaggeration
    for it in range(cfg.iterations):
        if it == EXAGGERATION_ITERS:
            p_eff = p
        momentum = MOMENTUM_EARLY if it < EXAGGERATION_ITERS else MOMENTUM_LATE
        grad, _ = kernels.kl_gradient(p_eff, y)
        velocity = momentum * velocity - cfg.learning_rate * grad
        y = y + velocity
        y -= y.mean(axis=0)
    return y


def kl_divergence(p, y) -> float:
    """KL(P || Q) of an embedding against a precomputed joint P."""
    _, kl = kernels.kl_gradient(p, y)
    return float(kl)
