"""WAV loading, resampling, and non-overlapping chunking."""

from __future__ import annotations

import wave
from pathlib import Path

import numpy as np
from scipy.signal import resample_poly


class AudioError(Exception):
    """Audio could not be decoded or is unusable."""


def load_wav(path) -> tuple[np.ndarray, int]:
    """Load a PCM WAV file as mono float32 in [-1, 1] plus its sample rate."""
    path = Path(path)
    try:
        with wave.open(str(path), "rb") as wav:
            n_channels = wav.getnchannels()
            width = wav.getsampwidth()
            rate = wav.getframerate()
            raw = wav.readframes(wav.getnframes())
    except (OSError, wave.Error, EOFError) as exc:
        raise AudioError(f"cannot decode {path}: {exc}") from exc
    if width == 2:
        samples = np.frombuffer(raw, dtype="<i2").astype(np.float32) / 32768.0
    elif width == 4:
        samples = np.frombuffer(raw, dtype="<i4").astype(np.float32) / 2147483648.0
    elif width == 1:
        samples = (np.frombuffer(raw, dtype=np.uint8).astype(np.float32) - 128.0) / 128.0
    else:
        raise AudioError(f"{path}: unsupported sample width {width} bytes")
    if n_channels > 1:
        samples = samples.reshape(-1, n_channels).mean(axis=1)
    if samples.size == 0:
        raise AudioError(f"{path}: no audio frames")
    return samples, rate


def resample(samples: np.ndarray, rate: int, target_rate: int) -> np.ndarray:
    if rate == target_rate:
        return samples
    from math import gcd

    g = gcd(rate, target_rate)
    return resample_poly(samples, target_rate // g, rate // g).astype(np.float32)


def chunk(samples: np.ndarray, rate: int, chunk_s: float) -> np.ndarray:
    """Split into floor(duration / chunk_s) non-overlapping chunks.

    The trailing remainder shorter than one chunk is dropped.
    """
    per = int(round(chunk_s * rate))
    n = samples.shape[0] // per
    if n < 1:
        raise AudioError(f"audio shorter than one {chunk_s} s chunk")
    return samples[: n * per].reshape(n, per)
