"""Domain types and the EMB1 embedding interchange format.

EMB1 layout (all integers and floats little-endian):

    bytes 0-3    ASCII magic "EMB1"
    bytes 4-7    format version, u32, currently 1
    bytes 8-11   D (embedding dimension), u32
    bytes 12-15  N (frame count), u32
    bytes 16-19  frame_duration_s, f32
    bytes 20-23  start_offset_s, f32
    bytes 24-27  layer, u32
    bytes 28-31  L, u32, byte length of the UTF-8 recording_id
    next L       recording_id, UTF-8
    next 4 + L2  u32 length prefix + UTF-8 model_id
    rest         N * D f32 values, row-major

Prototype files use the same layout with N = 1.  Timing metadata is stored
as f32, so sequences coerce those two fields to f32 precision at
construction; that makes write-then-read an exact identity.

Manifests are plain JSON: {"recordings": [{"recording_id", "split",
"duration_s", "embedding_path", "prototype_path"}, ...]} with paths
resolved relative to the manifest file.  Unknown keys are ignored so other
tools can attach extra metadata.
"""

from __future__ import annotations

import json
import math
import os
import struct
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import (
    DimMismatch,
    EmptySlice,
    FormatError,
    InvalidValue,
    IoError,
    LengthMismatch,
    TruncatedFile,
)

MAGIC = b"EMB1"
FORMAT_VERSION = 1

_HEADER = struct.Struct("<4sIIIffI")


def _f32(value: float, name: str) -> float:
    """Coerce a scalar to f32 precision, rejecting non-finite input."""
    out = float(np.float32(value))
    if not math.isfinite(out):
        raise InvalidValue(f"{name} must be finite, got {value!r}")
    return out


def _as_frames(values, name: str = "frames") -> np.ndarray:
    arr = np.ascontiguousarray(values, dtype=np.float32)
    if arr.ndim != 2:
        raise InvalidValue(f"{name} must be a 2-D matrix, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InvalidValue(f"{name} must have at least one row and column, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidValue(f"{name} contain non-finite values")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class EmbeddingSequence:
    """Time-ordered embedding frames of one recording.

    Frame i starts at ``start_offset_s + i * frame_duration_s``.  Frames are
    stored as float32 (the payload type of the EMB1 format) and the array is
    read-only; all derived sequences are new objects.
    """

    recording_id: str
    model_id: str
    layer: int
    frame_duration_s: float
    start_offset_s: float
    frames: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "frames", _as_frames(self.frames))
        if self.layer < 0:
            raise InvalidValue(f"layer must be >= 0, got {self.layer}")
        dur = _f32(self.frame_duration_s, "frame_duration_s")
        if dur <= 0:
            raise InvalidValue(f"frame_duration_s must be > 0, got {dur}")
        off = _f32(self.start_offset_s, "start_offset_s")
        if off < 0:
            raise InvalidValue(f"start_offset_s must be >= 0, got {off}")
        object.__setattr__(self, "frame_duration_s", dur)
        object.__setattr__(self, "start_offset_s", off)

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def dim(self) -> int:
        return self.frames.shape[1]

    @property
    def times_s(self) -> np.ndarray:
        """Timestamp of each frame, float64 seconds."""
        return self.start_offset_s + np.arange(self.n_frames, dtype=np.float64) * self.frame_duration_s

    def with_frames(self, frames, start_offset_s: float | None = None) -> "EmbeddingSequence":
        """Copy of this sequence with new frames (and optionally a new offset)."""
        return EmbeddingSequence(
            recording_id=self.recording_id,
            model_id=self.model_id,
            layer=self.layer,
            frame_duration_s=self.frame_duration_s,
            start_offset_s=self.start_offset_s if start_offset_s is None else start_offset_s,
            frames=frames,
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, EmbeddingSequence):
            return NotImplemented
        return (
            self.recording_id == other.recording_id
            and self.model_id == other.model_id
            and self.layer == other.layer
            and self.frame_duration_s == other.frame_duration_s
            and self.start_offset_s == other.start_offset_s
            and self.frames.shape == other.frames.shape
            and bool(np.array_equal(self.frames, other.frames))
        )


class PrototypeSource(Enum):
    EXTERNALLY_SUPPLIED = "externally_supplied"
    MEAN_OF_FRAMES = "mean_of_frames"


@dataclass(frozen=True, eq=False)
class Prototype:
    """Per-recording constant vector subtracted during normalization."""

    recording_id: str
    vector: np.ndarray
    source: PrototypeSource

    def __post_init__(self):
        vec = np.ascontiguousarray(self.vector, dtype=np.float32)
        if vec.ndim != 1 or vec.shape[0] < 1:
            raise InvalidValue(f"prototype vector must be 1-D and nonempty, got shape {vec.shape}")
        if not np.all(np.isfinite(vec)):
            raise InvalidValue("prototype vector contains non-finite values")
        vec.setflags(write=False)
        object.__setattr__(self, "vector", vec)

    @property
    def dim(self) -> int:
        return self.vector.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Prototype):
            return NotImplemented
        return (
            self.recording_id == other.recording_id
            and self.source == other.source
            and bool(np.array_equal(self.vector, other.vector))
        )


class Split(Enum):
    TRAIN = "train"
    TEST = "test"


@dataclass(frozen=True)
class RecordingManifest:
    """One manifest row: where a recording's artifacts live and how it is used."""

    recording_id: str
    split: Split
    duration_s: float
    embedding_path: Path
    prototype_path: Path | None = None

    def __post_init__(self):
        if self.duration_s <= 0:
            raise InvalidValue(f"duration_s must be > 0, got {self.duration_s}")


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """Feature rows with class labels, provenance, and timestamps."""

    features: np.ndarray
    labels: np.ndarray
    recording_ids: tuple
    times_s: np.ndarray

    def __post_init__(self):
        feats = np.ascontiguousarray(self.features, dtype=np.float32)
        labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        times = np.ascontiguousarray(self.times_s, dtype=np.float64)
        ids = tuple(self.recording_ids)
        if feats.ndim != 2:
            raise InvalidValue(f"features must be 2-D, got shape {feats.shape}")
        m = feats.shape[0]
        if m < 1:
            raise InvalidValue("dataset must contain at least one row")
        if not (labels.shape == (m,) and times.shape == (m,) and len(ids) == m):
            raise LengthMismatch(
                f"features/labels/recording_ids/times_s lengths differ: "
                f"{m}/{labels.shape[0]}/{len(ids)}/{times.shape[0]}"
            )
        if labels.min() < 0 or labels.max() > 2:
            raise InvalidValue("class indices must lie in {0, 1, 2}")
        present = set(np.unique(labels).tolist())
        k = labels.max() + 1
        if present != set(range(int(k))):
            raise InvalidValue(f"class indices must be contiguous from 0, got {sorted(present)}")
        for arr in (feats, labels, times):
            arr.setflags(write=False)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "recording_ids", ids)
        object.__setattr__(self, "times_s", times)

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_classes(self) -> int:
        return int(self.labels.max()) + 1

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)


def concat_datasets(datasets) -> LabeledDataset:
    """Stack datasets row-wise; feature dimensions must agree."""
    datasets = list(datasets)
    if not datasets:
        raise InvalidValue("cannot concatenate zero datasets")
    dims = {d.features.shape[1] for d in datasets}
    if len(dims) != 1:
        raise DimMismatch(f"datasets have mixed feature dimensions: {sorted(dims)}")
    ids = tuple(rid for d in datasets for rid in d.recording_ids)
    return LabeledDataset(
        features=np.vstack([d.features for d in datasets]),
        labels=np.concatenate([d.labels for d in datasets]),
        recording_ids=ids,
        times_s=np.concatenate([d.times_s for d in datasets]),
    )


# ---------------------------------------------------------------------------
# EMB1 reading and writing


def _pack_string(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


def embeddings_to_bytes(seq: EmbeddingSequence) -> bytes:
    """Serialize a sequence to the EMB1 byte layout."""
    n, d = seq.frames.shape
    blob = _HEADER.pack(
        MAGIC,
        FORMAT_VERSION,
        d,
        n,
        np.float32(seq.frame_duration_s),
        np.float32(seq.start_offset_s),
        seq.layer,
    )
    blob += _pack_string(seq.recording_id)
    blob += _pack_string(seq.model_id)
    blob += seq.frames.astype("<f4", copy=False).tobytes(order="C")
    return blob


def write_embeddings(seq: EmbeddingSequence, path) -> None:
    """Write a sequence to ``path`` in the EMB1 format (atomic replace)."""
    blob = embeddings_to_bytes(seq)
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    try:
        tmp.write_bytes(blob)
        os.replace(tmp, path)
    except OSError as exc:
        tmp.unlink(missing_ok=True)
        raise IoError(f"cannot write {path}: {exc}") from exc


class _Cursor:
    """Byte reader that raises TruncatedFile when data runs out."""

    def __init__(self, blob: bytes, path):
        self.blob = blob
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise TruncatedFile(
                f"{self.path}: need {n} bytes at offset {self.pos}, "
                f"file has {len(self.blob)}"
            )
        out = self.blob[self.pos : self.pos + n]
        self.pos += n
        return out

    def take_string(self) -> str:
        (length,) = struct.unpack("<I", self.take(4))
        raw = self.take(length)
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError(f"{self.path}: string field is not valid UTF-8") from exc


def embeddings_from_bytes(blob: bytes, origin="<bytes>", offset: int = 0) -> tuple[EmbeddingSequence, int]:
    """Parse one EMB1 record starting at ``offset``.

    Returns the sequence and the offset one past its last byte, so records
    can be embedded in larger containers.
    """
    cur = _Cursor(blob, origin)
    cur.pos = offset
    header = cur.take(_HEADER.size)
    magic, version, d, n, frame_dur, start_off, layer = _HEADER.unpack(header)
    if magic != MAGIC:
        raise FormatError(f"{origin}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"{origin}: unsupported format version {version}")
    recording_id = cur.take_string()
    model_id = cur.take_string()
    payload = cur.take(n * d * 4)
    frames = np.frombuffer(payload, dtype="<f4").reshape(n, d)
    seq = EmbeddingSequence(
        recording_id=recording_id,
        model_id=model_id,
        layer=layer,
        frame_duration_s=frame_dur,
        start_offset_s=start_off,
        frames=frames,
    )
    return seq, cur.pos


def read_embeddings(path) -> EmbeddingSequence:
    """Read an EMB1 file into an EmbeddingSequence."""
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    seq, end = embeddings_from_bytes(blob, origin=path)
    if end != len(blob):
        raise FormatError(f"{path}: {len(blob) - end} unexpected trailing bytes")
    return seq


def write_prototype(proto: Prototype, path) -> None:
    """Store a prototype as a single-frame EMB1 file."""
    seq = EmbeddingSequence(
        recording_id=proto.recording_id,
        model_id=proto.source.value,
        layer=0,
        frame_duration_s=1.0,
        start_offset_s=0.0,
        frames=proto.vector[None, :],
    )
    write_embeddings(seq, path)


def read_prototype(path) -> Prototype:
    seq = read_embeddings(path)
    if seq.n_frames != 1:
        raise FormatError(f"{path}: prototype files must contain exactly one frame, got {seq.n_frames}")
    try:
        source = PrototypeSource(seq.model_id)
    except ValueError:
        source = PrototypeSource.EXTERNALLY_SUPPLIED
    return Prototype(recording_id=seq.recording_id, vector=seq.frames[0], source=source)


# ---------------------------------------------------------------------------
# Time slicing


def slice_by_time(seq: EmbeddingSequence, start_s: float, end_s: float) -> EmbeddingSequence:
    """Frames whose timestamp t satisfies start_s <= t < end_s.

    The slice keeps all metadata; its start offset becomes the timestamp of
    the first retained frame.
    """
    if not (0 <= start_s < end_s):
        raise InvalidValue(f"need 0 <= start < end, got [{start_s}, {end_s})")
    times = seq.times_s
    mask = (times >= start_s) & (times < end_s)
    if not mask.any():
        raise EmptySlice(f"no frames of {seq.recording_id!r} fall in [{start_s}, {end_s})")
    idx = np.flatnonzero(mask)
    return seq.with_frames(seq.frames[idx[0] : idx[-1] + 1], start_offset_s=times[idx[0]])


# ---------------------------------------------------------------------------
# Manifests


def _manifest_row(entry: dict, base: Path, index: int) -> RecordingManifest:
    try:
        rid = entry["recording_id"]
        split = Split(entry["split"])
        duration = float(entry["duration_s"])
        emb = base / entry["embedding_path"]
    except (KeyError, ValueError) as exc:
        raise FormatError(f"manifest entry {index}: {exc}") from exc
    proto = entry.get("prototype_path")
    return RecordingManifest(
        recording_id=rid,
        split=split,
        duration_s=duration,
        embedding_path=emb,
        prototype_path=base / proto if proto else None,
    )


def read_manifest(path) -> list[RecordingManifest]:
    """Load a manifest, checking id uniqueness and path readability."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("recordings"), list):
        raise FormatError(f"{path}: expected an object with a 'recordings' list")
    rows = [_manifest_row(e, path.parent, i) for i, e in enumerate(doc["recordings"])]
    seen = set()
    for row in rows:
        if row.recording_id in seen:
            raise InvalidValue(f"{path}: duplicate recording_id {row.recording_id!r}")
        seen.add(row.recording_id)
        for p in (row.embedding_path, row.prototype_path):
            if p is not None and not os.access(p, os.R_OK):
                raise IoError(f"{path}: referenced file not readable: {p}")
    return rows


def write_manifest(rows, path) -> None:
    """Write manifest rows as JSON with paths relative to the manifest dir."""
    path = Path(path)
    base = path.parent

    def rel(p: Path | None):
        return None if p is None else os.path.relpath(p, base)

    doc = {
        "recordings": [
            {
                "recording_id": r.recording_id,
                "split": r.split.value,
                "duration_s": r.duration_s,
                "embedding_path": rel(r.embedding_path),
                "prototype_path": rel(r.prototype_path),
            }
            for r in rows
        ]
    }
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    os.replace(tmp, path)
