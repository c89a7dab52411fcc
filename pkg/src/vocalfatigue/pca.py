"""Principal component analysis used to shrink embeddings before the SVM.

The fit runs a thin SVD of the centered data matrix, which is numerically
better conditioned than forming the covariance explicitly; eigenvalues are
recovered as squared singular values over M - 1.  Components are rows,
deterministically signed: the entry of largest magnitude in each row is
made nonnegative.

A fitted model serializes to an EMB1 container holding the mean as frame 0
and the K component rows as frames 1..K (recording_id "pca_model",
model_id "pca", frame_duration_s 1.0), plus a JSON sidecar with the
explained variances.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import EmbeddingSequence, read_embeddings, write_embeddings
from .errors import BadComponentCount, DimMismatch, FormatError, InvalidValue, IoError


@dataclass(frozen=True, eq=False)
class PcaModel:
    """Mean vector plus an orthonormal row basis with explained variances."""

    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray

    def __post_init__(self):
        mean = np.ascontiguousarray(self.mean, dtype=np.float64)
        comp = np.ascontiguousarray(self.components, dtype=np.float64)
        var = np.ascontiguousarray(self.explained_variance, dtype=np.float64)
        if mean.ndim != 1 or comp.ndim != 2 or comp.shape[1] != mean.shape[0]:
            raise DimMismatch(
                f"components {comp.shape} do not match mean of dim {mean.shape}"
            )
        if var.shape != (comp.shape[0],):
            raise DimMismatch("one explained variance per component required")
        if np.any(var < 0) or np.any(np.diff(var) > 0):
            raise InvalidValue("explained_variance must be nonnegative and nonincreasing")
        for arr in (mean, comp, var):
            arr.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "components", comp)
        object.__setattr__(self, "explained_variance", var)

    @property
    def n_components(self) -> int:
        return self.components.shape[0]

    @property
    def dim(self) -> int:
        return self.components.shape[1]

    def truncated(self, k: int) -> "PcaModel":
        """Sub-model keeping the top k components (same mean)."""
        if not 1 <= k <= self.n_components:
            raise BadComponentCount(f"k={k} outside [1, {self.n_components}]")
        return PcaModel(self.mean, self.components[:k], self.explained_variance[:k])


def _fix_signs(components: np.ndarray) -> np.ndarray:
    """Make each row's largest-magnitude entry nonnegative (in place)."""
    lead = np.abs(components).argmax(axis=1)
    flip = components[np.arange(components.shape[0]), lead] < 0
    components[flip] *= -1.0
    return components


def fit_pca(x, k: int) -> PcaModel:
    """Fit the top-k principal axes of the rows of x.

    Covariance normalization is 1/(M-1); the SVM's gamma grid absorbs the
    constant either way.  Directions of (near-)zero variance are kept as
    returned by the decomposition, which makes rank-deficient fits
    deterministic.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise InvalidValue(f"x must be 2-D, got shape {x.shape}")
    m, d = x.shape
    if m < 2:
        raise InvalidValue(f"need at least 2 samples to fit, got {m}")
    if not np.all(np.isfinite(x)):
        raise InvalidValue("x contains non-finite values")
    if not 1 <= k <= min(m, d):
        raise BadComponentCount(f"k={k} outside [1, min(M={m}, D={d})]")

    mean = x.mean(axis=0)
    centered = x - mean
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    components = _fix_signs(vt[:k].copy())
    variance = (s[:k] ** 2) / (m - 1)
    return PcaModel(mean=mean, components=components, explained_variance=variance)


def pca_transform(model: PcaModel, x) -> np.ndarray:
    """Project rows of x onto the model's components: (x - mean) @ C^T."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != model.dim:
        raise DimMismatch(f"x has shape {x.shape}, model dim is {model.dim}")
    out = (x - model.mean) @ model.components.T
    return out[0] if single else out


def save_pca(model: PcaModel, emb_path, variance_path) -> None:
    """Write the model as EMB1 (mean + components) plus a JSON sidecar."""
    seq = EmbeddingSequence(
        recording_id="pca_model",
        model_id="pca",
        layer=0,
        frame_duration_s=1.0,
        start_offset_s=0.0,
        frames=np.vstack([model.mean[None, :], model.components]),
    )
    write_embeddings(seq, emb_path)
    doc = {
        "n_components": model.n_components,
        "explained_variance": model.explained_variance.tolist(),
    }
    variance_path = Path(variance_path)
    tmp = variance_path.with_name(variance_path.name + ".tmp")
    try:
        tmp.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        os.replace(tmp, variance_path)
    except OSError as exc:
        raise IoError(f"cannot write {variance_path}: {exc}") from exc


def load_pca(emb_path, variance_path) -> PcaModel:
    seq = read_embeddings(emb_path)
    try:
        doc = json.loads(Path(variance_path).read_text())
        variance = np.asarray(doc["explained_variance"], dtype=np.float64)
        k = int(doc["n_components"])
    except OSError as exc:
        raise IoError(f"cannot read {variance_path}: {exc}") from exc
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise FormatError(f"{variance_path}: invalid PCA sidecar: {exc}") from exc
    if seq.n_frames != k + 1 or variance.shape != (k,):
        raise FormatError(
            f"{emb_path}: expected 1 mean + {k} component frames, got {seq.n_frames}"
        )
    frames = seq.frames.astype(np.float64)
    return PcaModel(mean=frames[0], components=frames[1:], explained_variance=variance)
