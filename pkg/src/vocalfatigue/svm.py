"""Soft-margin RBF-SVM trained by sequential minimal optimization.

Training works on a precomputed kernel matrix and selects working pairs by
maximal KKT violation (see kernels.smo_solve).  Grid search runs a seeded,
stratified fivefold cross-validation over (n_pca, gamma, C) and breaks
accuracy ties toward simpler models: smallest n_pca, then smallest C, then
smallest gamma.

Model container format (little-endian, one file):

    bytes 0-3   ASCII magic "SVM1"
    u32         number of binary sub-models (1, or K*(K-1)/2 one-vs-one)
    per sub-model:
        u32 + JSON header  {"classes", "gamma", "bias", "c", "tol",
                            "converged"}
        EMB1 block         support vectors (recording_id "svm_support")
        S * f32            dual coefficients (alpha_i * y_i)

One-vs-one containers carry the overall class list in a leading JSON block
of the same length-prefixed shape.
"""

from __future__ import annotations

import itertools
import json
import os
import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .core import (
    EmbeddingSequence,
    LabeledDataset,
    embeddings_from_bytes,
    embeddings_to_bytes,
)
from .errors import (
    DegenerateLabels,
    DimMismatch,
    FormatError,
    InvalidValue,
    IoError,
    TooFewSamples,
    TruncatedFile,
)
from .pca import fit_pca, pca_transform

DEFAULT_TOL = 1e-3
DEFAULT_MAX_PASSES = 10_000


class ConvergenceWarning(UserWarning):
    """SMO hit its step budget; the best iterate is returned anyway."""


def rbf_kernel(x, y, gamma: float) -> float:
    """k(x, y) = exp(-gamma * ||x - y||^2)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise DimMismatch(f"vectors of shapes {x.shape} and {y.shape}")
    if gamma <= 0:
        raise InvalidValue(f"gamma must be positive, got {gamma}")
    diff = x - y
    return float(np.exp(-gamma * np.dot(diff, diff)))


def rbf_kernel_matrix(x, y, gamma: float) -> np.ndarray:
    """Kernel matrix between the rows of x and the rows of y."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape[1] != y.shape[1]:
        raise DimMismatch(f"row dims differ: {x.shape[1]} vs {y.shape[1]}")
    xx = np.einsum("ij,ij->i", x, x)
    yy = np.einsum("ij,ij->i", y, y)
    d2 = xx[:, None] + yy[None, :] - 2.0 * (x @ y.T)
    np.maximum(d2, 0.0, out=d2)
    return np.exp(-gamma * d2)


@dataclass(frozen=True, eq=False)
class SvmModel:
    """Binary RBF-SVM: support vectors, signed dual coefficients, bias."""

    support_vectors: np.ndarray
    dual_coefs: np.ndarray
    bias: float
    gamma: float
    classes: tuple
    c: float
    tol: float
    converged: bool

    def __post_init__(self):
        sv = np.ascontiguousarray(self.support_vectors, dtype=np.float64)
        coef = np.ascontiguousarray(self.dual_coefs, dtype=np.float64)
        if sv.ndim != 2 or sv.shape[0] < 1:
            raise InvalidValue("need at least one support vector")
        if coef.shape != (sv.shape[0],):
            raise DimMismatch("one dual coefficient per support vector required")
        if len(self.classes) != 2:
            raise InvalidValue("binary model needs exactly two classes")
        sv.setflags(write=False)
        coef.setflags(write=False)
        object.__setattr__(self, "support_vectors", sv)
        object.__setattr__(self, "dual_coefs", coef)


def train_svm(
    x,
    y,
    c: float,
    gamma: float,
    tol: float = DEFAULT_TOL,
    max_passes: int = DEFAULT_MAX_PASSES,
) -> SvmModel:
    """Train a binary RBF-SVM with SMO.

    ``y`` may use any two label values; the smaller one maps to the
    negative side.  A model that exhausted ``max_passes`` (pair updates)
    carries converged=False and triggers a ConvergenceWarning.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y)
    if x.ndim != 2 or x.shape[0] != y.shape[0]:
        raise DimMismatch(f"x {x.shape} and y {y.shape} do not align")
    if x.shape[0] < 2:
        raise InvalidValue(f"need at least 2 samples, got {x.shape[0]}")
    classes = np.unique(y)
    if classes.shape[0] != 2:
        raise DegenerateLabels(f"need exactly 2 classes, got {classes.shape[0]}")
    if gamma <= 0 or c <= 0:
        raise InvalidValue(f"gamma and c must be positive, got gamma={gamma}, c={c}")

    signs = np.where(y == classes[1], 1.0, -1.0)
    kmat = rbf_kernel_matrix(x, x, gamma)
    model, _ = _train_on_kernel(kmat, signs, x, classes, c, gamma, tol, max_passes)
    return model


def _train_on_kernel(kmat, signs, x, classes, c, gamma, tol, max_passes):
    """SMO on a precomputed kernel; returns (model, alpha over all rows)."""
    alpha, bias, gap, _, converged = kernels.smo_solve(kmat, signs, c, tol, max_passes)
    if not converged:
        warnings.warn(
            f"SMO stopped after {max_passes} pair updates with KKT gap {gap:.3e}",
            ConvergenceWarning,
            stacklevel=3,
        )
    sv_mask = alpha > 0.0
    if not sv_mask.any():
        # Zero steps can only happen on degenerate budgets; keep the model
        # well-formed by carrying one vector with zero weight.
        sv_mask[0] = True
    model = SvmModel(
        support_vectors=x[sv_mask],
        dual_coefs=(alpha * signs)[sv_mask],
        bias=bias,
        gamma=gamma,
        classes=tuple(classes.tolist()),
        c=c,
        tol=tol,
        converged=converged,
    )
    return model, alpha


def decision_function(model: SvmModel, x) -> np.ndarray:
    """f(x) = sum_i dual_coefs[i] * k(sv_i, x) + bias."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.shape[1] != model.support_vectors.shape[1]:
        raise DimMismatch(
            f"x dim {x.shape[1]} != support vector dim {model.support_vectors.shape[1]}"
        )
    scores = rbf_kernel_matrix(x, model.support_vectors, model.gamma) @ model.dual_coefs
    scores += model.bias
    return scores[0] if single else scores


def predict(model: SvmModel, x) -> np.ndarray:
    """classes[1] where the decision function is >= 0, else classes[0]."""
    scores = np.atleast_1d(decision_function(model, x))
    return np.asarray(model.classes)[(scores >= 0).astype(np.intp)]


def dual_objective(model_alpha, signs, kmat) -> float:
    """Dual objective sum(alpha) - 1/2 alpha^T Q alpha for diagnostics and tests."""
    fhat = kmat @ (model_alpha * signs)
    return float(model_alpha.sum() - 0.5 * np.dot(model_alpha * signs, fhat))


# ---------------------------------------------------------------------------
# One-vs-one multiclass


@dataclass(frozen=True)
class MultiClassSvm:
    """One-vs-one ensemble; ties broken by summed decision values."""

    classes: tuple
    models: tuple  # one SvmModel per class pair, in itertools.combinations order

    def __post_init__(self):
        expected = len(self.classes) * (len(self.classes) - 1) // 2
        if len(self.models) != expected:
            raise InvalidValue(f"expected {expected} pairwise models, got {len(self.models)}")


def train_multiclass(x, y, c, gamma, tol=DEFAULT_TOL, max_passes=DEFAULT_MAX_PASSES) -> MultiClassSvm:
    y = np.asarray(y)
    classes = np.unique(y)
    if classes.shape[0] < 2:
        raise DegenerateLabels("need at least 2 classes")
    if classes.shape[0] == 2:
        return MultiClassSvm(
            classes=tuple(classes.tolist()),
            models=(train_svm(x, y, c, gamma, tol, max_passes),),
        )
    x = np.asarray(x, dtype=np.float64)
    models = []
    for a, b in itertools.combinations(classes.tolist(), 2):
        mask = (y == a) | (y == b)
        models.append(train_svm(x[mask], y[mask], c, gamma, tol, max_passes))
    return MultiClassSvm(classes=tuple(classes.tolist()), models=tuple(models))


def predict_multiclass(ensemble: MultiClassSvm, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    n = x.shape[0]
    classes = list(ensemble.classes)
    votes = np.zeros((n, len(classes)), dtype=np.int64)
    score_sum = np.zeros((n, len(classes)))
    index = {cls: k for k, cls in enumerate(classes)}
    for model in ensemble.models:
        neg, pos = model.classes
        scores = np.atleast_1d(decision_function(model, x))
        pos_wins = scores >= 0
        votes[pos_wins, index[pos]] += 1
        votes[~pos_wins, index[neg]] += 1
        score_sum[:, index[pos]] += scores
        score_sum[:, index[neg]] -= scores
    # Majority vote; break ties by the summed signed decision values.
    out = np.empty(n, dtype=np.int64)
    for r in range(n):
        top = votes[r].max()
        tied = np.flatnonzero(votes[r] == top)
        winner = tied[np.argmax(score_sum[r, tied])] if tied.size > 1 else tied[0]
        out[r] = classes[winner]
    return out


# ---------------------------------------------------------------------------
# Grid search with stratified fivefold cross-validation


@dataclass(frozen=True)
class HyperGrid:
    """Hyperparameter grid; defaults follow the standard experiment grids."""

    n_pca: tuple
    gamma: tuple = (1e-5, 1e-4, 1e-3, 1e-2, 1e-1)
    c: tuple = (5.0, 10.0, 20.0, 50.0)
    folds: int = 5

    def __post_init__(self):
        if not (self.n_pca and self.gamma and self.c):
            raise InvalidValue("all grid axes must be nonempty")
        if self.folds < 2:
            raise InvalidValue(f"folds must be >= 2, got {self.folds}")

    @classmethod
    def default_for_dim(cls, dim: int) -> "HyperGrid":
        """n_pca = {2^k | k = 5 .. floor(log2 dim)}; needs dim >= 32."""
        top = int(np.floor(np.log2(dim)))
        if top < 5:
            raise InvalidValue(f"default n_pca grid needs dim >= 32, got {dim}")
        return cls(n_pca=tuple(2**k for k in range(5, top + 1)))


@dataclass(frozen=True)
class GridEntry:
    n_pca: int
    gamma: float
    c: float
    fold_accuracies: tuple
    mean_accuracy: float


@dataclass(frozen=True)
class GridResult:
    entries: tuple
    best: GridEntry
    ties: tuple = field(default_factory=tuple)

    def to_table(self) -> list[dict]:
        return [
            {
                "n_pca": e.n_pca,
                "gamma": e.gamma,
                "c": e.c,
                "fold_accuracies": list(e.fold_accuracies),
                "mean_accuracy": e.mean_accuracy,
            }
            for e in self.entries
        ]


def stratified_folds(labels, n_folds: int, seed: int) -> np.ndarray:
    """Deterministic per-class shuffle, then round-robin fold assignment."""
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    fold_of = np.empty(labels.shape[0], dtype=np.int64)
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        if idx.size < n_folds:
            raise TooFewSamples(
                f"class {cls} has {idx.size} samples, need >= {n_folds} for {n_folds}-fold CV"
            )
        rng.shuffle(idx)
        fold_of[idx] = np.arange(idx.size) % n_folds
    return fold_of


def _sq_dists(a, b) -> np.ndarray:
    aa = np.einsum("ij,ij->i", a, a)
    bb = np.einsum("ij,ij->i", b, b)
    d2 = aa[:, None] + bb[None, :] - 2.0 * (a @ b.T)
    np.maximum(d2, 0.0, out=d2)
    return d2


def _fold_accuracy_from_kernels(k_train, k_cross, y_train, y_test, classes, c, tol, max_passes) -> float:
    """Train on a precomputed kernel and score via the cross kernel.

    Scoring contracts the full alpha vector against k_cross, which avoids
    materializing support-vector matrices for every grid combination.
    """
    if classes.shape[0] == 2:
        signs = np.where(y_train == classes[1], 1.0, -1.0)
        alpha, bias, _, _, _ = kernels.smo_solve(k_train, signs, c, tol, max_passes)
        scores = k_cross @ (alpha * signs) + bias
        pred = np.where(scores >= 0, classes[1], classes[0])
    else:
        n = y_test.shape[0]
        votes = np.zeros((n, classes.shape[0]), dtype=np.int64)
        score_sum = np.zeros((n, classes.shape[0]))
        index = {cls: k for k, cls in enumerate(classes.tolist())}
        for a, b in itertools.combinations(classes.tolist(), 2):
            sub = np.flatnonzero((y_train == a) | (y_train == b))
            y_sub = y_train[sub]
            signs = np.where(y_sub == b, 1.0, -1.0)
            k_sub = np.ascontiguousarray(k_train[np.ix_(sub, sub)])
            alpha, bias, _, _, _ = kernels.smo_solve(k_sub, signs, c, tol, max_passes)
            scores = k_cross[:, sub] @ (alpha * signs) + bias
            pos = scores >= 0
            votes[pos, index[b]] += 1
            votes[~pos, index[a]] += 1
            score_sum[:, index[b]] += scores
            score_sum[:, index[a]] -= scores
        pred = np.empty(n, dtype=y_train.dtype)
        for r in range(n):
            top = votes[r].max()
            tied = np.flatnonzero(votes[r] == top)
            winner = tied[np.argmax(score_sum[r, tied])] if tied.size > 1 else tied[0]
            pred[r] = classes[winner]
    return float((pred == y_test).mean())


def grid_search_cv(
    data: LabeledDataset,
    grid: HyperGrid,
    seed: int,
    tol: float = DEFAULT_TOL,
    max_passes: int = DEFAULT_MAX_PASSES,
) -> GridResult:
    """Mean CV accuracy for every (n_pca, gamma, C) combination.

    PCA is refit on each fold's training part only; the test part is
    transformed with the fold's model, never its own.  Results are merged
    by combination index, so any execution order yields the same report.
    """
    x = data.features.astype(np.float64)
    y = data.labels
    fold_of = stratified_folds(y, grid.folds, seed)
    k_max = max(grid.n_pca)
    combos = [
        (n_pca, gamma, c)
        for n_pca in sorted(grid.n_pca)
        for gamma in sorted(grid.gamma)
        for c in sorted(grid.c)
    ]
    combo_index = {combo: ci for ci, combo in enumerate(combos)}
    accs = np.zeros((len(combos), grid.folds))

    classes = np.unique(y)
    for fold in range(grid.folds):
        train_mask = fold_of != fold
        x_tr, y_tr = x[train_mask], y[train_mask]
        x_te, y_te = x[~train_mask], y[~train_mask]
        if k_max > min(x_tr.shape):
            raise InvalidValue(
                f"n_pca={k_max} exceeds min(fold samples={x_tr.shape[0]}, dim={x_tr.shape[1]})"
            )
        # Top-k slices of one full fit equal separate k-component fits.
        pca_full = fit_pca(x_tr, k_max)
        for n_pca in sorted(grid.n_pca):
            sub = pca_full.truncated(n_pca)
            z_tr = pca_transform(sub, x_tr)
            z_te = pca_transform(sub, x_te)
            d2_train = _sq_dists(z_tr, z_tr)
            d2_cross = _sq_dists(z_te, z_tr)
            for gamma in sorted(grid.gamma):
                k_train = np.exp(-gamma * d2_train)
                k_cross = np.exp(-gamma * d2_cross)
                for c in sorted(grid.c):
                    ci = combo_index[(n_pca, gamma, c)]
                    accs[ci, fold] = _fold_accuracy_from_kernels(
                        k_train, k_cross, y_tr, y_te, classes, c, tol, max_passes
                    )

    entries = tuple(
        GridEntry(
            n_pca=n_pca,
            gamma=gamma,
            c=c,
            fold_accuracies=tuple(accs[ci].tolist()),
            mean_accuracy=float(accs[ci].mean()),
        )
        for ci, (n_pca, gamma, c) in enumerate(combos)
    )
    best_acc = max(e.mean_accuracy for e in entries)
    ties = tuple(e for e in entries if e.mean_accuracy == best_acc)
    best = min(ties, key=lambda e: (e.n_pca, e.c, e.gamma))
    return GridResult(entries=entries, best=best, ties=ties)


# ---------------------------------------------------------------------------
# Serialization

_MAGIC = b"SVM1"


def _pack_json(obj) -> bytes:
    raw = json.dumps(obj, sort_keys=True).encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


def _emb1_bytes(matrix) -> bytes:
    seq = EmbeddingSequence(
        recording_id="svm_support",
        model_id="svm",
        layer=0,
        frame_duration_s=1.0,
        start_offset_s=0.0,
        frames=matrix,
    )
    return embeddings_to_bytes(seq)


def save_svm(model, path) -> None:
    """Write a binary SvmModel or a MultiClassSvm to the SVM1 container."""
    if isinstance(model, SvmModel):
        classes, models = model.classes, (model,)
    else:
        classes, models = model.classes, model.models
    blob = _MAGIC + struct.pack("<I", len(models))
    blob += _pack_json({"classes": list(classes)})
    for m in models:
        blob += _pack_json(
            {
                "classes": list(m.classes),
                "gamma": m.gamma,
                "bias": m.bias,
                "c": m.c,
                "tol": m.tol,
                "converged": m.converged,
            }
        )
        blob += _emb1_bytes(m.support_vectors.astype(np.float32))
        blob += m.dual_coefs.astype("<f4").tobytes()
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    try:
        tmp.write_bytes(blob)
        os.replace(tmp, path)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_svm(path):
    """Load an SVM1 container; returns SvmModel or MultiClassSvm."""
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if blob[:4] != _MAGIC:
        raise FormatError(f"{path}: bad magic {blob[:4]!r}")
    pos = 4

    def take(n):
        nonlocal pos
        if pos + n > len(blob):
            raise TruncatedFile(f"{path}: need {n} bytes at offset {pos}")
        out = blob[pos : pos + n]
        pos += n
        return out

    def take_json():
        (length,) = struct.unpack("<I", take(4))
        return json.loads(take(length).decode("utf-8"))

    (n_models,) = struct.unpack("<I", take(4))
    header = take_json()
    classes = tuple(header["classes"])
    models = []
    for _ in range(n_models):
        meta = take_json()
        seq, pos = embeddings_from_bytes(blob, origin=path, offset=pos)
        sv = seq.frames.astype(np.float64)
        coefs = np.frombuffer(take(sv.shape[0] * 4), dtype="<f4").astype(np.float64)
        models.append(
            SvmModel(
                support_vectors=sv,
                dual_coefs=coefs,
                bias=float(meta["bias"]),
                gamma=float(meta["gamma"]),
                classes=tuple(meta["classes"]),
                c=float(meta["c"]),
                tol=float(meta["tol"]),
                converged=bool(meta["converged"]),
            )
        )
    if pos != len(blob):
        raise FormatError(f"{path}: {len(blob) - pos} unexpected trailing bytes")
    if len(models) == 1 and tuple(models[0].classes) == classes:
        return models[0]
    return MultiClassSvm(classes=classes, models=tuple(models))
