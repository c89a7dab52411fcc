"""Writer for the EMB1 embedding interchange format.

Independent implementation of the downstream pipeline's wire format so the
two packages meet only at the bytes (little-endian):

    "EMB1" | version u32=1 | D u32 | N u32 | frame_duration f32 |
    start_offset f32 | layer u32 | len+recording_id | len+model_id |
    N*D f32 row-major

Prototype files are the same with N = 1.
"""

from __future__ import annotations

import json
import os
import struct
from pathlib import Path

import numpy as np

MAGIC = b"EMB1"
VERSION = 1


def _string(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


def write_emb1(
    path,
    frames: np.ndarray,
    recording_id: str,
    model_id: str,
    layer: int = 0,
    frame_duration_s: float = 3.0,
    start_offset_s: float = 0.0,
) -> None:
    frames = np.ascontiguousarray(frames, dtype=np.float32)
    if frames.ndim != 2 or frames.shape[0] < 1:
        raise ValueError(f"frames must be a nonempty 2-D matrix, got {frames.shape}")
    if not np.all(np.isfinite(frames)):
        raise ValueError("frames contain non-finite values")
    n, d = frames.shape
    blob = struct.pack(
        "<4sIIIffI",
        MAGIC,
        VERSION,
        d,
        n,
        np.float32(frame_duration_s),
        np.float32(start_offset_s),
        layer,
    )
    blob += _string(recording_id) + _string(model_id)
    blob += frames.astype("<f4", copy=False).tobytes(order="C")
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(blob)
    os.replace(tmp, path)


def write_manifest(rows: list[dict], path) -> None:
    """Manifest JSON consumed by the downstream pipeline.

    Extra keys (sample_rate_hz, model, layer) ride along; the consumer
    ignores what it does not know.
    """
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps({"recordings": rows}, indent=2, sort_keys=True) + "\n")
    os.replace(tmp, path)
