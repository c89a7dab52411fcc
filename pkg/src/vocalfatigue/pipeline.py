"""Recording-to-dataset assembly shared by the CLI commands.

The standard order is: normalize (optional) -> smooth (optional) -> label.
Normalizing first applies the prototype to the full-length sequence;
because both steps are linear the order is numerically immaterial.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .core import (
    EmbeddingSequence,
    LabeledDataset,
    RecordingManifest,
    Split,
    concat_datasets,
    read_embeddings,
    read_prototype,
)
from .errors import InvalidValue, IoError
from .preprocess import (
    LabelMode,
    LabelSpec,
    SmoothingConfig,
    assign_labels,
    compute_prototype,
    normalize,
    smooth,
)
from .svm import HyperGrid


class Normalization(Enum):
    NONE = "none"
    MEAN = "mean"
    EXTERNAL = "external"


@dataclass(frozen=True)
class PipelineConfig:
    """Everything a run needs; persisted next to every result."""

    manifest: str
    out_dir: str
    seed: int = 0
    window_s: float = 60.0
    normalization: Normalization = Normalization.MEAN
    mode: LabelMode = LabelMode.BINARY
    segment_duration_s: float = 600.0
    n_pca: tuple | None = None
    gamma: tuple | None = None
    c: tuple | None = None

    def grid_for_dim(self, dim: int) -> HyperGrid:
        base = HyperGrid.default_for_dim(dim) if self.n_pca is None else HyperGrid(n_pca=tuple(self.n_pca))
        return HyperGrid(
            n_pca=base.n_pca,
            gamma=tuple(self.gamma) if self.gamma is not None else base.gamma,
            c=tuple(self.c) if self.c is not None else base.c,
        )

    def label_spec(self) -> LabelSpec:
        return LabelSpec(mode=self.mode, segment_duration_s=self.segment_duration_s)

    def to_json_dict(self) -> dict:
        return {
            "manifest": self.manifest,
            "out_dir": self.out_dir,
            "seed": self.seed,
            "window_s": self.window_s,
            "normalization": self.normalization.value,
            "mode": self.mode.value,
            "segment_duration_s": self.segment_duration_s,
            "n_pca": list(self.n_pca) if self.n_pca is not None else None,
            "gamma": list(self.gamma) if self.gamma is not None else None,
            "c": list(self.c) if self.c is not None else None,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "PipelineConfig":
        def tup(v):
            return tuple(v) if v is not None else None

        return cls(
            manifest=doc["manifest"],
            out_dir=doc["out_dir"],
            seed=int(doc.get("seed", 0)),
            window_s=float(doc.get("window_s", 60.0)),
            normalization=Normalization(doc.get("normalization", "mean")),
            mode=LabelMode(doc.get("mode", "binary")),
            segment_duration_s=float(doc.get("segment_duration_s", 600.0)),
            n_pca=tup(doc.get("n_pca")),
            gamma=tup(doc.get("gamma")),
            c=tup(doc.get("c")),
        )


def save_config(cfg: PipelineConfig, path) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(cfg.to_json_dict(), indent=2, sort_keys=True) + "\n")
    os.replace(tmp, path)


def load_config(path) -> PipelineConfig:
    try:
        return PipelineConfig.from_json_dict(json.loads(Path(path).read_text()))
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc


def preprocess_sequence(seq: EmbeddingSequence, cfg: PipelineConfig, row: RecordingManifest | None = None) -> EmbeddingSequence:
    """Apply the configured normalization and smoothing to one sequence."""
    if cfg.normalization is Normalization.MEAN:
        seq = normalize(seq, compute_prototype(seq))
    elif cfg.normalization is Normalization.EXTERNAL:
        if row is None or row.prototype_path is None:
            raise InvalidValue(
                f"external normalization needs a prototype_path for {seq.recording_id!r}"
            )
        seq = normalize(seq, read_prototype(row.prototype_path))
    if cfg.window_s > 0:
        seq = smooth(seq, SmoothingConfig(window_s=cfg.window_s))
    return seq


def build_dataset(rows, cfg: PipelineConfig) -> LabeledDataset:
    """Load, preprocess, and label every manifest row, then stack."""
    rows = list(rows)
    if not rows:
        raise InvalidValue("no recordings to build a dataset from")
    spec = cfg.label_spec()
    parts = []
    for row in rows:
        seq = read_embeddings(row.embedding_path)
        seq = preprocess_sequence(seq, cfg, row)
        parts.append(assign_labels(seq, spec, row.duration_s))
    return concat_datasets(parts)


def split_rows(rows, split: Split) -> list[RecordingManifest]:
    return [r for r in rows if r.split is split]
