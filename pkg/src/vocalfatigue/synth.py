"""Seeded generator of drifting synthetic embedding sequences.

Each recording is base + per-recording offset + linear drift + Gaussian
frame noise.  The drift direction is shared across recordings and its
total displacement is ``drift_magnitude`` noise standard deviations, so a
nonzero drift makes early and late windows separable after preprocessing.
The per-recording offset models traits that recording-level normalization
exists to remove; with a large offset sigma, classifiers trained on raw
frames generalize poorly across recordings while normalized ones do not.

Child RNG streams are spawned per recording, so recordings are independent
and any subset can be regenerated in parallel without changing values.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import (
    EmbeddingSequence,
    RecordingManifest,
    Split,
    write_embeddings,
    write_manifest,
    write_prototype,
)
from .errors import InvalidValue
from .preprocess import compute_prototype

FRAME_DURATION_S = 3.0


@dataclass(frozen=True)
class SynthConfig:
    n_recordings: int = 19
    duration_s: float = 3600.0
    dim: int = 192
    drift_magnitude: float = 8.0
    noise_sigma: float = 1.0
    per_recording_offset_sigma: float = 10.0
    seed: int = 20240901

    def __post_init__(self):
        if self.n_recordings < 1 or self.dim < 1:
            raise InvalidValue("n_recordings and dim must be positive")
        if self.duration_s < FRAME_DURATION_S:
            raise InvalidValue(f"duration_s must be >= {FRAME_DURATION_S}")
        if self.noise_sigma <= 0:
            raise InvalidValue("noise_sigma must be > 0")
        if self.drift_magnitude < 0 or self.per_recording_offset_sigma < 0:
            raise InvalidValue("drift_magnitude and offset sigma must be >= 0")

    @property
    def n_train(self) -> int:
        return (self.n_recordings + 1) // 2


def generate(cfg: SynthConfig) -> list[tuple[EmbeddingSequence, RecordingManifest]]:
    """Deterministic synthetic corpus; first (n+1)//2 recordings are Train.

    Manifest paths are the relative file names write_corpus would create.
    """
    root = np.random.SeedSequence(cfg.seed)
    children = root.spawn(cfg.n_recordings + 1)
    shared = np.random.default_rng(children[0])
    base = shared.normal(0.0, 1.0, cfg.dim)
    direction = shared.normal(0.0, 1.0, cfg.dim)
    direction /= np.linalg.norm(direction)
    drift = cfg.drift_magnitude * cfg.noise_sigma * direction

    n_frames = int(cfg.duration_s // FRAME_DURATION_S)
    times = np.arange(n_frames, dtype=np.float64) * FRAME_DURATION_S
    progress = (times / cfg.duration_s)[:, None]

    out = []
    for r in range(cfg.n_recordings):
        rng = np.random.default_rng(children[r + 1])
        offset = rng.normal(0.0, cfg.per_recording_offset_sigma, cfg.dim)
        noise = rng.normal(0.0, cfg.noise_sigma, (n_frames, cfg.dim))
        frames = base + offset + progress * drift + noise
        rid = f"synth-{r:02d}"
        seq = EmbeddingSequence(
            recording_id=rid,
            model_id="synthetic",
            layer=0,
            frame_duration_s=FRAME_DURATION_S,
            start_offset_s=0.0,
            frames=frames.astype(np.float32),
        )
        manifest = RecordingManifest(
            recording_id=rid,
            split=Split.TRAIN if r < cfg.n_train else Split.TEST,
            duration_s=cfg.duration_s,
            embedding_path=Path(f"{rid}.emb"),
            prototype_path=Path(f"{rid}.proto.emb"),
        )
        out.append((seq, manifest))
    return out


def drift_vector(cfg: SynthConfig) -> np.ndarray:
    """The exact drift displacement used by ``generate`` for this config."""
    shared = np.random.default_rng(np.random.SeedSequence(cfg.seed).spawn(1)[0])
    shared.normal(0.0, 1.0, cfg.dim)  # skip the base draw
    direction = shared.normal(0.0, 1.0, cfg.dim)
    direction /= np.linalg.norm(direction)
    return cfg.drift_magnitude * cfg.noise_sigma * direction


def write_corpus(cfg: SynthConfig, out_dir) -> Path:
    """Write EMB1 files, mean-of-frames prototypes, and the manifest.

    Returns the manifest path.  Prototypes let the "external" normalization
    mode run on synthetic data.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for seq, manifest in generate(cfg):
        emb_path = out_dir / manifest.embedding_path
        proto_path = out_dir / manifest.prototype_path
        write_embeddings(seq, emb_path)
        write_prototype(compute_prototype(seq), proto_path)
        rows.append(
            RecordingManifest(
                recording_id=manifest.recording_id,
                split=manifest.split,
                duration_s=manifest.duration_s,
                embedding_path=emb_path,
                prototype_path=proto_path,
            )
        )
    manifest_path = out_dir / "manifest.json"
    write_manifest(rows, manifest_path)
    return manifest_path
