"""Embedding backends: TDNN x-vector (512), ECAPA-style TDNN (192), and
wav2vec 2.0 hidden states (768).

Each backend embeds 3-second chunks and, where the architecture supports
pooling over arbitrary lengths, a whole recording in one pass (used for
prototype vectors).  Weights load from --checkpoint; without one the
backend runs with seeded random initialization, which keeps dimensions,
determinism, and timing contracts intact but carries no acoustic meaning
(useful for format and pipeline testing only).
"""

from __future__ import annotations

import numpy as np
import torch
import torch.nn as nn

from .features import mfcc

SAMPLE_RATE = 16_000


class StatsPooling(nn.Module):
    """Mean and standard deviation over time, concatenated per channel."""

    def forward(self, x):  # (B, C, T)
        mean = x.mean(dim=2)
        std = x.std(dim=2, unbiased=False)
        return torch.cat([mean, std], dim=1)


class XVectorTdnn(nn.Module):
    """Dilated TDNN stack with stats pooling; embeddings at the bottleneck."""

    EMBED_DIM = 512
    N_MFCC = 30

    def __init__(self):
        super().__init__()
        def block(cin, cout, k, dilation=1):
            return nn.Sequential(
                nn.Conv1d(cin, cout, k, dilation=dilation),
                nn.ReLU(),
                nn.BatchNorm1d(cout),
            )

        self.frames = nn.Sequential(
            block(self.N_MFCC, 512, 5, 1),
            block(512, 512, 3, 2),
            block(512, 512, 3, 3),
            block(512, 512, 1),
            block(512, 1500, 1),
        )
        self.pool = StatsPooling()
        self.embedding = nn.Linear(3000, self.EMBED_DIM)

    def forward(self, feats):  # (B, N_MFCC, T)
        return self.embedding(self.pool(self.frames(feats)))

    def featurize(self, chunks: np.ndarray) -> torch.Tensor:
        return torch.from_numpy(
            np.stack([mfcc(c, SAMPLE_RATE, self.N_MFCC) for c in chunks])
        )


class SERes2Block(nn.Module):
    """Res2-style grouped dilated convolution with squeeze-excitation."""

    def __init__(self, channels, kernel, dilation, scale=4, se_bottleneck=64):
        super().__init__()
        self.scale = scale
        width = channels // scale
        self.conv_in = nn.Sequential(
            nn.Conv1d(channels, channels, 1), nn.ReLU(), nn.BatchNorm1d(channels)
        )
        pad = dilation * (kernel - 1) // 2
        self.convs = nn.ModuleList(
            nn.Conv1d(width, width, kernel, dilation=dilation, padding=pad)
            for _ in range(scale - 1)
        )
        self.conv_out = nn.Sequential(
            nn.Conv1d(channels, channels, 1), nn.ReLU(), nn.BatchNorm1d(channels)
        )
        self.se = nn.Sequential(
            nn.Linear(channels, se_bottleneck),
            nn.ReLU(),
            nn.Linear(se_bottleneck, channels),
            nn.Sigmoid(),
        )

    def forward(self, x):
        out = self.conv_in(x)
        parts = torch.chunk(out, self.scale, dim=1)
        processed = [parts[0]]
        prev = None
        for conv, part in zip(self.convs, parts[1:]):
            inp = part if prev is None else part + prev
            prev = torch.relu(conv(inp))
            processed.append(prev)
        out = self.conv_out(torch.cat(processed, dim=1))
        gate = self.se(out.mean(dim=2)).unsqueeze(2)
        return x + out * gate


class AttentiveStatsPooling(nn.Module):
    """Channel-weighted mean and std with learned frame attention."""

    def __init__(self, channels, bottleneck=128):
        super().__init__()
        self.attention = nn.Sequential(
            nn.Conv1d(channels, bottleneck, 1),
            nn.Tanh(),
            nn.Conv1d(bottleneck, channels, 1),
        )

    def forward(self, x):  # (B, C, T)
        weights = torch.softmax(self.attention(x), dim=2)
        mean = (x * weights).sum(dim=2)
        var = (x * x * weights).sum(dim=2) - mean * mean
        std = torch.sqrt(torch.clamp(var, min=1e-8))
        return torch.cat([mean, std], dim=1)


class EcapaTdnn(nn.Module):
    """Compact ECAPA-style network: SE-Res2 blocks, multi-layer feature
    aggregation, attentive stats pooling, 192-dim embedding."""

    EMBED_DIM = 192
    N_MFCC = 80

    def __init__(self, channels=256):
        super().__init__()
        self.stem = nn.Sequential(
            nn.Conv1d(self.N_MFCC, channels, 5, padding=2),
            nn.ReLU(),
            nn.BatchNorm1d(channels),
        )
        self.blocks = nn.ModuleList(
            [
                SERes2Block(channels, 3, 2),
                SERes2Block(channels, 3, 3),
                SERes2Block(channels, 3, 4),
            ]
        )
        self.mfa = nn.Sequential(nn.Conv1d(3 * channels, 3 * channels, 1), nn.ReLU())
        self.pool = AttentiveStatsPooling(3 * channels)
        self.embedding = nn.Linear(6 * channels, self.EMBED_DIM)

    def forward(self, feats):  # (B, N_MFCC, T)
        x = self.stem(feats)
        outs = []
        for blk in self.blocks:
            x = blk(x)
            outs.append(x)
        return self.embedding(self.pool(self.mfa(torch.cat(outs, dim=1))))

    def featurize(self, chunks: np.ndarray) -> torch.Tensor:
        return torch.from_numpy(
            np.stack([mfcc(c, SAMPLE_RATE, self.N_MFCC, n_mels=80) for c in chunks])
        )


class ModelLoadError(Exception):
    pass


class TdnnBackend:
    """x-vector or ECAPA embeddings for chunks and whole recordings."""

    def __init__(self, kind: str, checkpoint=None, init_seed: int = 0):
        torch.manual_seed(init_seed)
        self.kind = kind
        self.net = XVectorTdnn() if kind == "xvector" else EcapaTdnn()
        if checkpoint is not None:
            try:
                state = torch.load(checkpoint, map_location="cpu", weights_only=True)
                self.net.load_state_dict(state)
            except Exception as exc:
                raise ModelLoadError(f"cannot load {kind} checkpoint {checkpoint}: {exc}") from exc
        self.net.eval()

    @property
    def dim(self) -> int:
        return self.net.EMBED_DIM

    @torch.no_grad()
    def embed_chunks(self, chunks: np.ndarray, batch_size: int = 16) -> np.ndarray:
        out = []
        for start in range(0, chunks.shape[0], batch_size):
            feats = self.net.featurize(chunks[start : start + batch_size])
            out.append(self.net(feats).numpy())
        return np.vstack(out)

    @torch.no_grad()
    def embed_recording(self, samples: np.ndarray) -> np.ndarray:
        """One pooled embedding over the entire recording (prototype)."""
        feats = self.net.featurize(samples[None, :])
        return self.net(feats).numpy()[0]


class W2v2Backend:
    """wav2vec 2.0 hidden states at a chosen transformer layer, mean-pooled
    per chunk.  Whole-recording pooling is not supported; prototypes fall
    back to the mean of chunk embeddings."""

    EMBED_DIM = 768
    N_LAYERS = 12

    def __init__(self, layer: int = 1, checkpoint=None, init_seed: int = 0):
        from transformers import Wav2Vec2Config, Wav2Vec2Model

        if not 1 <= layer <= self.N_LAYERS:
            raise ModelLoadError(f"w2v2 layer must be in 1..{self.N_LAYERS}, got {layer}")
        self.layer = layer
        torch.manual_seed(init_seed)
        if checkpoint is not None:
            try:
                self.net = Wav2Vec2Model.from_pretrained(checkpoint)
            except Exception as exc:
                raise ModelLoadError(f"cannot load w2v2 checkpoint {checkpoint}: {exc}") from exc
        else:
            self.net = Wav2Vec2Model(Wav2Vec2Config())
        self.net.eval()

    @property
    def dim(self) -> int:
        return self.EMBED_DIM

    @torch.no_grad()
    def embed_chunks(self, chunks: np.ndarray, batch_size: int = 4) -> np.ndarray:
        out = []
        for start in range(0, chunks.shape[0], batch_size):
            batch = torch.from_numpy(chunks[start : start + batch_size])
            hidden = self.net(batch, output_hidden_states=True).hidden_states
            out.append(hidden[self.layer].mean(dim=1).numpy())
        return np.vstack(out)

    def embed_recording(self, samples: np.ndarray) -> np.ndarray:
        raise ModelLoadError("w2v2 cannot pool a whole recording in one pass")


def build_backend(kind: str, layer: int = 1, checkpoint=None, init_seed: int = 0):
    if kind in ("xvector", "ecapa"):
        return TdnnBackend(kind, checkpoint=checkpoint, init_seed=init_seed)
    if kind == "w2v2":
        return W2v2Backend(layer=layer, checkpoint=checkpoint, init_seed=init_seed)
    raise ModelLoadError(f"unknown model kind {kind!r}")
