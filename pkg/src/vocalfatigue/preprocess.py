"""Temporal smoothing, recording-level normalization, and label assignment.

Smoothing replaces a sequence of W frames by W - w + 1 sliding-window
channel means (stride 1); normalization subtracts one constant prototype
vector from every frame.  Both are linear, so their order does not change
the result beyond float roundoff; the standard pipeline normalizes first
so prototypes apply to full-length sequences.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import EmbeddingSequence, LabeledDataset, Prototype, PrototypeSource
from .errors import (
    DimMismatch,
    InvalidValue,
    OverlappingWindows,
    ProvenanceError,
    RecordingTooShort,
    WindowTooLarge,
)


@dataclass(frozen=True)
class SmoothingConfig:
    """Sliding-window mean of ``window_s`` seconds; 0 disables smoothing."""

    window_s: float = 0.0

    def __post_init__(self):
        if self.window_s < 0:
            raise InvalidValue(f"window_s must be >= 0, got {self.window_s}")

    def window_frames(self, frame_duration_s: float) -> int:
        """Window length in frames; only meaningful when window_s > 0."""
        w = round(self.window_s / frame_duration_s)
        if w < 1:
            raise InvalidValue(
                f"window_s={self.window_s} rounds to zero frames at "
                f"frame_duration_s={frame_duration_s}"
            )
        return w


def smooth(seq: EmbeddingSequence, cfg: SmoothingConfig) -> EmbeddingSequence:
    """Channel-wise sliding mean (stride 1).

    Output frame i is the mean of input frames i..i+w-1 and keeps frame i's
    timestamp, so the sequence shrinks by w - 1 frames at the end.
    """
    if cfg.window_s == 0:
        return seq
    w = cfg.window_frames(seq.frame_duration_s)
    if w == 1:
        return seq
    n = seq.n_frames
    if w > n:
        raise WindowTooLarge(f"window of {w} frames exceeds sequence length {n}")
    windows = np.lib.stride_tricks.sliding_window_view(seq.frames, w, axis=0)
    means = windows.mean(axis=-1, dtype=np.float64)
    return seq.with_frames(means.astype(np.float32))


def compute_prototype(seq: EmbeddingSequence) -> Prototype:
    """Arithmetic mean over all frames of a recording."""
    mean = seq.frames.mean(axis=0, dtype=np.float64)
    return Prototype(
        recording_id=seq.recording_id,
        vector=mean.astype(np.float32),
        source=PrototypeSource.MEAN_OF_FRAMES,
    )


def normalize(seq: EmbeddingSequence, proto: Prototype) -> EmbeddingSequence:
    """Subtract the prototype vector from every frame."""
    if proto.dim != seq.dim:
        raise DimMismatch(f"prototype dim {proto.dim} != sequence dim {seq.dim}")
    if proto.recording_id and proto.recording_id != seq.recording_id:
        raise ProvenanceError(
            f"prototype belongs to {proto.recording_id!r}, sequence is {seq.recording_id!r}"
        )
    return seq.with_frames(seq.frames - proto.vector)


class LabelMode(Enum):
    BINARY = "binary"
    THREE_CLASS = "three"


NON_FATIGUED = 0
FATIGUED = 1
MID = 2

#: Fixed start of the fatigued window in the binary experiment (minute 50).
BINARY_FATIGUE_START_S = 3000.0

#: Minimum recording duration admitted to the binary experiment.
BINARY_MIN_DURATION_S = 3600.0


@dataclass(frozen=True)
class LabelSpec:
    """Class windows for the binary and three-class experiments.

    Binary: non-fatigued is the first ``segment_duration_s`` seconds,
    fatigued is the fixed window starting at minute 50.  Three-class keeps
    the first window, takes fatigued from the last ``segment_duration_s``
    seconds, and adds a transition class centered at the recording midpoint.
    """

    mode: LabelMode = LabelMode.BINARY
    segment_duration_s: float = 600.0

    def __post_init__(self):
        if self.segment_duration_s <= 0:
            raise InvalidValue(f"segment_duration_s must be > 0, got {self.segment_duration_s}")

    def windows(self, duration_s: float) -> list[tuple[int, float, float]]:
        """(class, start, end) windows for a recording of the given duration."""
        d = self.segment_duration_s
        if self.mode is LabelMode.BINARY:
            if duration_s < BINARY_MIN_DURATION_S:
                raise RecordingTooShort(
                    f"binary labeling needs >= {BINARY_MIN_DURATION_S:.0f} s, got {duration_s:.0f} s"
                )
            wins = [
                (NON_FATIGUED, 0.0, d),
                (FATIGUED, BINARY_FATIGUE_START_S, BINARY_FATIGUE_START_S + d),
            ]
        else:
            mid = duration_s / 2.0
            wins = [
                (NON_FATIGUED, 0.0, d),
                (FATIGUED, duration_s - d, duration_s),
                (MID, mid - d / 2.0, mid + d / 2.0),
            ]
        ordered = sorted(wins, key=lambda w: w[1])
        for (_, _, hi), (_, lo, _) in zip(ordered, ordered[1:]):
            if lo < hi:
                raise OverlappingWindows(
                    f"label windows overlap on a {duration_s:.0f} s recording: {ordered}"
                )
        return wins


def assign_labels(seq: EmbeddingSequence, spec: LabelSpec, duration_s: float) -> LabeledDataset:
    """Emit every frame whose timestamp falls in a label window.

    Frames outside all windows are discarded.  ``duration_s`` is the true
    recording duration (a smoothed sequence is shorter than its recording).
    """
    times = seq.times_s
    labels = np.full(seq.n_frames, -1, dtype=np.int64)
    for cls, lo, hi in spec.windows(duration_s):
        labels[(times >= lo) & (times < hi)] = cls
    keep = labels >= 0
    if not keep.any():
        raise InvalidValue(f"no frames of {seq.recording_id!r} fall in any label window")
    m = int(keep.sum())
    return LabeledDataset(
        features=seq.frames[keep],
        labels=labels[keep],
        recording_ids=(seq.recording_id,) * m,
        times_s=times[keep],
    )
