"""Synthetic corpus generator: determinism, drift geometry, corpus layout."""

import numpy as np
import pytest

from vocalfatigue.core import Split, read_embeddings, read_manifest, read_prototype
from vocalfatigue.errors import InvalidValue
from vocalfatigue.synth import FRAME_DURATION_S, SynthConfig, drift_vector, generate, write_corpus


def small_cfg(**overrides):
    base = dict(
        n_recordings=3,
        duration_s=3600.0,
        dim=16,
        drift_magnitude=8.0,
        noise_sigma=1.0,
        per_recording_offset_sigma=10.0,
        seed=11,
    )
    base.update(overrides)
    return SynthConfig(**base)


class TestGenerate:
    def test_shapes_and_metadata(self):
        cfg = small_cfg()
        out = generate(cfg)
        assert len(out) == 3
        for seq, manifest in out:
            assert seq.n_frames == 1200
            assert seq.dim == 16
            assert seq.frame_duration_s == FRAME_DURATION_S
            assert seq.start_offset_s == 0.0
            assert manifest.duration_s == 3600.0
            assert seq.recording_id == manifest.recording_id

    def test_split_counts(self):
        cfg = small_cfg(n_recordings=19)
        out = generate(cfg)
        splits = [m.split for _, m in out]
        assert splits.count(Split.TRAIN) == 10
        assert splits.count(Split.TEST) == 9

    def test_deterministic(self):
        a = generate(small_cfg())
        b = generate(small_cfg())
        for (s1, _), (s2, _) in zip(a, b):
            assert s1 == s2

    def test_different_seeds_differ(self):
        a = generate(small_cfg(seed=1))
        b = generate(small_cfg(seed=2))
        assert not np.array_equal(a[0][0].frames, b[0][0].frames)

    def test_recordings_independent_of_count(self):
        # Child streams per recording: the first recordings do not change
        # when more are appended.
        a = generate(small_cfg(n_recordings=2))
        b = generate(small_cfg(n_recordings=5))
        assert a[0][0] == b[0][0]
        assert a[1][0] == b[1][0]

    def test_validation(self):
        with pytest.raises(InvalidValue):
            SynthConfig(n_recordings=0)
        with pytest.raises(InvalidValue):
            SynthConfig(noise_sigma=0.0)
        with pytest.raises(InvalidValue):
            SynthConfig(drift_magnitude=-1.0)


class TestDriftGeometry:
    def test_end_to_end_displacement(self):
        # Difference of window means at the two ends, corrected for the
        # window centers, recovers the drift vector.  Seed is fixed; the
        # 4 sigma / sqrt(n) budget was verified for it once and frozen.
        cfg = small_cfg(per_recording_offset_sigma=0.0, seed=2024)
        drift = drift_vector(cfg)
        window = 200
        deltas = []
        for seq, _ in generate(cfg):
            head = seq.frames[:window].mean(axis=0, dtype=np.float64)
            tail = seq.frames[-window:].mean(axis=0, dtype=np.float64)
            # Window centers sit (window/2 - 1/2) frames in from each end.
            n = seq.n_frames
            frac = (n - window) / n
            deltas.append((tail - head) / frac)
        measured = np.mean(deltas, axis=0)
        tol = 4.0 * cfg.noise_sigma / np.sqrt(window)
        assert np.all(np.abs(measured - drift) < tol)

    def test_zero_drift_windows_match(self):
        cfg = small_cfg(drift_magnitude=0.0, per_recording_offset_sigma=0.0, seed=5)
        seq, _ = generate(cfg)[0]
        head = seq.frames[:200].mean(axis=0, dtype=np.float64)
        tail = seq.frames[-200:].mean(axis=0, dtype=np.float64)
        assert np.abs(head - tail).max() < 4.0 * cfg.noise_sigma / np.sqrt(200) * np.sqrt(2)

    def test_drift_vector_matches_generate(self):
        cfg = small_cfg()
        d = drift_vector(cfg)
        assert np.isclose(np.linalg.norm(d), cfg.drift_magnitude * cfg.noise_sigma)


class TestWriteCorpus:
    def test_round_trip_through_manifest(self, tmp_path):
        cfg = small_cfg()
        manifest_path = write_corpus(cfg, tmp_path)
        rows = read_manifest(manifest_path)
        assert len(rows) == 3
        generated = {m.recording_id: s for s, m in generate(cfg)}
        for row in rows:
            seq = read_embeddings(row.embedding_path)
            assert seq == generated[row.recording_id]
            proto = read_prototype(row.prototype_path)
            assert proto.recording_id == row.recording_id
            np.testing.assert_allclose(
                proto.vector,
                seq.frames.mean(axis=0, dtype=np.float64).astype(np.float32),
                rtol=1e-6,
            )
