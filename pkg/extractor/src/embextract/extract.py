"""Audio-to-EMB1 extraction: chunk, embed, pool, write."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

from .audio import chunk, load_wav, resample
from .emb1 import write_emb1, write_manifest
from .models import SAMPLE_RATE, build_backend

CHUNK_S = 3.0


@dataclass(frozen=True)
class ExtractorConfig:
    model: str = "ecapa"  # xvector | ecapa | w2v2
    layer: int = 1  # w2v2 only
    out_dir: str = "."
    emit_prototype: bool = False
    checkpoint: str | None = None
    init_seed: int = 0
    split: str = "test"


def extract_file(audio_path, cfg: ExtractorConfig, backend=None) -> dict:
    """Extract one recording; returns its manifest row."""
    if backend is None:
        backend = build_backend(cfg.model, cfg.layer, cfg.checkpoint, cfg.init_seed)
    samples, rate = load_wav(audio_path)
    duration_s = samples.shape[0] / rate
    samples = resample(samples, rate, SAMPLE_RATE)
    chunks = chunk(samples, SAMPLE_RATE, CHUNK_S)

    embeddings = backend.embed_chunks(chunks)
    rid = Path(audio_path).stem
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    emb_path = out_dir / f"{rid}.emb"
    layer = cfg.layer if cfg.model == "w2v2" else 0
    write_emb1(
        emb_path,
        embeddings,
        recording_id=rid,
        model_id=cfg.model,
        layer=layer,
        frame_duration_s=CHUNK_S,
        start_offset_s=0.0,
    )

    proto_path = None
    if cfg.emit_prototype:
        try:
            proto = backend.embed_recording(samples)
        except Exception:
            # Models that cannot pool a full recording fall back to the
            # mean of the chunk embeddings.
            proto = embeddings.mean(axis=0)
        proto_path = out_dir / f"{rid}.proto.emb"
        write_emb1(
            proto_path,
            proto[None, :],
            recording_id=rid,
            model_id="externally_supplied",
            layer=layer,
            frame_duration_s=1.0,
            start_offset_s=0.0,
        )

    row = {
        "recording_id": rid,
        "split": cfg.split,
        "duration_s": duration_s,
        "embedding_path": emb_path.name,
        "prototype_path": proto_path.name if proto_path else None,
        "sample_rate_hz": SAMPLE_RATE,
        "model": cfg.model,
        "layer": layer,
    }
    fragment = out_dir / f"{rid}.manifest.json"
    tmp = fragment.with_name(fragment.name + ".tmp")
    tmp.write_text(json.dumps(row, indent=2, sort_keys=True) + "\n")
    os.replace(tmp, fragment)
    return row


def extract_batch(audio_paths, cfg: ExtractorConfig) -> Path:
    """Extract many recordings with one shared backend; write a manifest."""
    backend = build_backend(cfg.model, cfg.layer, cfg.checkpoint, cfg.init_seed)
    rows = [extract_file(p, cfg, backend) for p in audio_paths]
    manifest_path = Path(cfg.out_dir) / "manifest.json"
    write_manifest(rows, manifest_path)
    return manifest_path
