"""MFCC front end for the TDNN backends (25 ms window, 10 ms hop)."""

from __future__ import annotations

import numpy as np
from scipy.fft import dct, rfft

WIN_S = 0.025
HOP_S = 0.010
EPS = 1e-10


def _hz_to_mel(hz):
    return 2595.0 * np.log10(1.0 + np.asarray(hz) / 700.0)


def _mel_to_hz(mel):
    return 700.0 * (10.0 ** (np.asarray(mel) / 2595.0) - 1.0)


def mel_filterbank(n_mels: int, n_fft: int, rate: int) -> np.ndarray:
    """Triangular mel filters over the rfft bins."""
    mels = np.linspace(_hz_to_mel(0.0), _hz_to_mel(rate / 2.0), n_mels + 2)
    bins = np.floor((n_fft + 1) * _mel_to_hz(mels) / rate).astype(int)
    bank = np.zeros((n_mels, n_fft // 2 + 1))
    for m in range(1, n_mels + 1):
        lo, center, hi = bins[m - 1], bins[m], bins[m + 1]
        for k in range(lo, center):
            if center > lo:
                bank[m - 1, k] = (k - lo) / (center - lo)
        for k in range(center, hi):
            if hi > center:
                bank[m - 1, k] = (hi - k) / (hi - center)
    return bank


def mfcc(samples: np.ndarray, rate: int, n_mfcc: int, n_mels: int = 40) -> np.ndarray:
    """(n_mfcc, T) cepstral features of a mono waveform."""
    win = int(round(WIN_S * rate))
    hop = int(round(HOP_S * rate))
    if samples.shape[0] < win:
        raise ValueError("audio shorter than one analysis window")
    n_frames = 1 + (samples.shape[0] - win) // hop
    idx = np.arange(win)[None, :] + hop * np.arange(n_frames)[:, None]
    frames = samples[idx] * np.hamming(win)
    n_fft = int(2 ** np.ceil(np.log2(win)))
    power = np.abs(rfft(frames, n_fft, axis=1)) ** 2
    bank = mel_filterbank(n_mels, n_fft, rate)
    logmel = np.log(power @ bank.T + EPS)
    ceps = dct(logmel, type=2, norm="ortho", axis=1)[:, :n_mfcc]
    return ceps.T.astype(np.float32)
