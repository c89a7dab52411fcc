"""SMO solver against the exhaustive QP oracle, KKT residuals, grid search."""

import numpy as np
import pytest

from oracles import dual_objective, qp_oracle
from vocalfatigue import kernels
from vocalfatigue.core import LabeledDataset
from vocalfatigue.errors import (
    DegenerateLabels,
    DimMismatch,
    InvalidValue,
    TooFewSamples,
)
from vocalfatigue.svm import (
    HyperGrid,
    MultiClassSvm,
    SvmModel,
    decision_function,
    grid_search_cv,
    load_svm,
    predict,
    predict_multiclass,
    rbf_kernel,
    rbf_kernel_matrix,
    save_svm,
    train_multiclass,
    train_svm,
)


def full_alpha(model, x):
    """Reconstruct per-row alpha by matching support vector rows to x rows."""
    x = np.asarray(x, dtype=np.float64)
    index = {}
    for i, row in enumerate(x):
        index.setdefault(row.tobytes(), []).append(i)
    alpha = np.zeros(x.shape[0])
    used = set()
    for sv, coef in zip(model.support_vectors, model.dual_coefs):
        for i in index[sv.tobytes()]:
            if i not in used:
                alpha[i] = abs(coef)
                used.add(i)
                break
    return alpha


def kkt_report(model, x, y):
    """Max violation of each KKT case plus the equality-constraint residual."""
    x = np.asarray(x, dtype=np.float64)
    signs = np.where(y == model.classes[1], 1.0, -1.0)
    alpha = full_alpha(model, x)
    margins = signs * decision_function(model, x)
    at_zero = alpha == 0.0
    at_c = alpha == model.c
    free = ~at_zero & ~at_c
    v_zero = float(np.max((1.0 - margins)[at_zero], initial=0.0))
    v_free = float(np.max(np.abs(margins - 1.0)[free], initial=0.0))
    v_c = float(np.max((margins - 1.0)[at_c], initial=0.0))
    eq = abs(float((alpha * signs).sum()))
    return max(v_zero, v_free, v_c), eq, alpha


class TestRbfKernel:
    def test_self_similarity_is_one(self):
        rng = np.random.default_rng(0)
        for _ in range(5):
            x = rng.normal(size=4)
            assert rbf_kernel(x, x, gamma=rng.uniform(0.01, 10)) == 1.0

    def test_known_value(self):
        assert np.isclose(rbf_kernel([0.0, 0.0], [1.0, 0.0], 1.0), np.exp(-1), atol=1e-12)

    def test_symmetric(self):
        rng = np.random.default_rng(1)
        x, y = rng.normal(size=3), rng.normal(size=3)
        assert rbf_kernel(x, y, 0.3) == rbf_kernel(y, x, 0.3)

    def test_monotone_in_gamma(self):
        x, y = np.zeros(2), np.ones(2)
        vals = [rbf_kernel(x, y, g) for g in (0.1, 0.5, 1.0, 5.0)]
        assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_range(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            v = rbf_kernel(rng.normal(size=3), rng.normal(size=3), 1.0)
            assert 0.0 < v <= 1.0

    def test_dim_mismatch(self):
        with pytest.raises(DimMismatch):
            rbf_kernel([1.0, 2.0], [1.0], 1.0)


def separable_clusters(seed=0):
    rng = np.random.default_rng(seed)
    a = rng.normal((0.0, 0.0), 0.1, (10, 2))
    b = rng.normal((10.0, 10.0), 0.1, (10, 2))
    return np.vstack([a, b]), np.array([0] * 10 + [1] * 10)


class TestTrainSvm:
    def test_separable_clusters(self):
        x, y = separable_clusters()
        model = train_svm(x, y, c=10.0, gamma=0.1)
        assert model.converged
        assert np.array_equal(predict(model, x), y)
        signs = np.where(y == model.classes[1], 1.0, -1.0)
        margins = signs * decision_function(model, x)
        assert np.all(margins >= 1.0 - model.tol)

    def test_xor_is_shattered(self):
        x = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
        y = np.array([1, 1, 0, 0])
        model = train_svm(x, y, c=100.0, gamma=1.0)
        assert np.array_equal(predict(model, x), y)

    def test_xor_matches_qp_oracle(self):
        x = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
        y = np.array([1, 1, 0, 0])
        signs = np.where(y == 1, 1.0, -1.0)
        kmat = rbf_kernel_matrix(x, x, 1.0)
        alpha, *_ = kernels.smo_solve(kmat, signs, 100.0, 1e-6, 100_000)
        best, _ = qp_oracle(kmat, signs, 100.0)
        assert abs(dual_objective(alpha, signs, kmat) - best) <= 1e-3

    def test_kkt_and_equality_on_trained_models(self):
        rng = np.random.default_rng(7)
        for trial in range(10):
            m = int(rng.integers(6, 30))
            x = rng.normal(size=(m, 3))
            y = rng.integers(0, 2, size=m)
            if len(np.unique(y)) < 2:
                y[0], y[1] = 0, 1
            c = float(rng.choice([1.0, 5.0, 20.0]))
            gamma = float(rng.choice([0.1, 1.0]))
            model = train_svm(x, y, c=c, gamma=gamma)
            violation, eq, alpha = kkt_report(model, x, y)
            assert violation <= model.tol + 1e-9
            assert eq <= 1e-8
            assert np.all(alpha >= 0.0) and np.all(alpha <= c)
            assert np.all(np.abs(model.dual_coefs) <= c + 1e-12)

    def test_degenerate_labels(self):
        with pytest.raises(DegenerateLabels):
            train_svm(np.zeros((4, 2)), np.zeros(4, dtype=int), 1.0, 1.0)

    def test_nonconvergence_warns_and_flags(self):
        x, y = separable_clusters(3)
        with pytest.warns(UserWarning):
            model = train_svm(x, y, c=10.0, gamma=0.1, max_passes=1)
        assert not model.converged

    def test_permutation_invariance_of_decision(self):
        rng = np.random.default_rng(11)
        x = np.vstack([
            rng.normal(0.0, 1.0, (20, 3)),
            rng.normal(2.5, 1.0, (20, 3)),
        ])
        y = np.array([0] * 20 + [1] * 20)
        perm = rng.permutation(40)
        probes = rng.normal(1.0, 2.0, (100, 3))
        m1 = train_svm(x, y, c=5.0, gamma=0.5, tol=1e-8, max_passes=500_000)
        m2 = train_svm(x[perm], y[perm], c=5.0, gamma=0.5, tol=1e-8, max_passes=500_000)
        d1 = decision_function(m1, probes)
        d2 = decision_function(m2, probes)
        assert np.abs(d1 - d2).max() <= 1e-6


class TestDualOracle:
    def test_all_small_problems_match(self):
        rng = np.random.default_rng(20240901)
        checked = 0
        for m in (2, 3, 4, 5, 6):
            for _trial in range(6):
                x = rng.normal(size=(m, 2))
                signs = rng.choice([-1.0, 1.0], size=m)
                if np.all(signs == signs[0]):
                    signs[0] = -signs[0]
                for c in (1.0, 10.0):
                    gamma = float(rng.choice([0.5, 1.0]))
                    kmat = rbf_kernel_matrix(x, x, gamma)
                    alpha, _, gap, _, conv = kernels.smo_solve(kmat, signs, c, 1e-6, 200_000)
                    smo_obj = dual_objective(alpha, signs, kmat)
                    best, _ = qp_oracle(kmat, signs, c)
                    assert conv
                    assert abs(smo_obj - best) <= 1e-3, (m, c, gamma, smo_obj, best)
                    assert abs(float(alpha @ signs)) <= 1e-8
                    checked += 1
        assert checked == 60


class TestInference:
    def test_far_points_fall_back_to_bias(self):
        x, y = separable_clusters(5)
        model = train_svm(x, y, c=10.0, gamma=1.0)
        far = np.full((1, 2), 1e4)
        assert np.isclose(decision_function(model, far)[0], model.bias, atol=1e-9)

    def test_predict_matches_decision_sign(self):
        x, y = separable_clusters(6)
        model = train_svm(x, y, c=10.0, gamma=0.5)
        probes = np.random.default_rng(8).normal(5.0, 6.0, (1000, 2))
        scores = decision_function(model, probes)
        labels = predict(model, probes)
        assert np.array_equal(labels == model.classes[1], scores >= 0)

    def test_dim_mismatch(self):
        x, y = separable_clusters(7)
        model = train_svm(x, y, c=10.0, gamma=0.5)
        with pytest.raises(DimMismatch):
            decision_function(model, np.zeros((2, 5)))


class TestMulticlass:
    def test_three_ordered_clusters(self):
        rng = np.random.default_rng(30)
        x = np.vstack([
            rng.normal(-4.0, 0.5, (15, 2)),
            rng.normal(4.0, 0.5, (15, 2)),
            rng.normal(0.0, 0.5, (15, 2)),
        ])
        y = np.array([0] * 15 + [1] * 15 + [2] * 15)
        ensemble = train_multiclass(x, y, c=10.0, gamma=0.5)
        assert len(ensemble.models) == 3
        assert np.array_equal(predict_multiclass(ensemble, x), y)

    def test_binary_input_wraps_single_model(self):
        x, y = separable_clusters(9)
        ensemble = train_multiclass(x, y, c=10.0, gamma=0.5)
        assert len(ensemble.models) == 1
        assert np.array_equal(predict_multiclass(ensemble, x), y)


def blob_dataset(seed=0, n_per=30, drift=4.0):
    rng = np.random.default_rng(seed)
    a = rng.normal(0.0, 1.0, (n_per, 6))
    b = rng.normal(drift / np.sqrt(6), 1.0, (n_per, 6))
    features = np.vstack([a, b]).astype(np.float32)
    labels = np.array([0] * n_per + [1] * n_per)
    return LabeledDataset(
        features=features,
        labels=labels,
        recording_ids=("r",) * (2 * n_per),
        times_s=np.arange(2 * n_per, dtype=np.float64),
    )


class TestGridSearch:
    def test_single_combination(self):
        data = blob_dataset()
        grid = HyperGrid(n_pca=(2,), gamma=(0.1,), c=(5.0,))
        result = grid_search_cv(data, grid, seed=0)
        assert len(result.entries) == 1
        assert result.best == result.entries[0]
        assert len(result.best.fold_accuracies) == 5

    def test_separable_data_scores_high(self):
        data = blob_dataset(drift=8.0)
        grid = HyperGrid(n_pca=(2, 4), gamma=(0.01, 0.1), c=(5.0, 10.0))
        result = grid_search_cv(data, grid, seed=1)
        assert result.best.mean_accuracy >= 0.95

    def test_deterministic(self):
        data = blob_dataset(seed=4)
        grid = HyperGrid(n_pca=(2, 3), gamma=(0.1, 1.0), c=(5.0,))
        r1 = grid_search_cv(data, grid, seed=42)
        r2 = grid_search_cv(data, grid, seed=42)
        assert r1 == r2

    def test_tie_break_prefers_simpler(self):
        data = blob_dataset(drift=50.0)  # everything reaches accuracy 1.0
        grid = HyperGrid(n_pca=(4, 2), gamma=(0.1,), c=(10.0, 5.0))
        result = grid_search_cv(data, grid, seed=0)
        assert result.best.mean_accuracy == 1.0
        assert result.best.n_pca == 2
        assert result.best.c == 5.0
        assert len(result.ties) >= 2

    def test_too_few_samples(self):
        data = blob_dataset(n_per=3)
        grid = HyperGrid(n_pca=(2,), gamma=(0.1,), c=(5.0,))
        with pytest.raises(TooFewSamples):
            grid_search_cv(data, grid, seed=0)

    def test_default_grid_values(self):
        grid = HyperGrid.default_for_dim(192)
        assert grid.n_pca == (32, 64, 128)
        assert grid.gamma == (1e-5, 1e-4, 1e-3, 1e-2, 1e-1)
        assert grid.c == (5.0, 10.0, 20.0, 50.0)
        assert grid.folds == 5
        assert HyperGrid.default_for_dim(512).n_pca == (32, 64, 128, 256, 512)
        with pytest.raises(InvalidValue):
            HyperGrid.default_for_dim(16)


class TestSerialization:
    def test_binary_round_trip(self, tmp_path):
        x, y = separable_clusters(12)
        model = train_svm(x, y, c=10.0, gamma=0.5)
        path = tmp_path / "model.bin"
        save_svm(model, path)
        back = load_svm(path)
        assert isinstance(back, SvmModel)
        assert back.classes == model.classes
        assert back.gamma == model.gamma
        assert back.c == model.c
        assert back.converged == model.converged
        probes = np.random.default_rng(1).normal(5.0, 5.0, (50, 2))
        # Support vectors are stored as f32, so scores match to f32 accuracy.
        np.testing.assert_allclose(
            decision_function(back, probes), decision_function(model, probes),
            rtol=1e-4, atol=1e-4,
        )

    def test_multiclass_round_trip(self, tmp_path):
        rng = np.random.default_rng(31)
        x = np.vstack([
            rng.normal(-4.0, 0.5, (10, 2)),
            rng.normal(4.0, 0.5, (10, 2)),
            rng.normal(0.0, 0.5, (10, 2)),
        ])
        y = np.array([0] * 10 + [1] * 10 + [2] * 10)
        ensemble = train_multiclass(x, y, c=10.0, gamma=0.5)
        path = tmp_path / "ovo.bin"
        save_svm(ensemble, path)
        back = load_svm(path)
        assert isinstance(back, MultiClassSvm)
        assert back.classes == ensemble.classes
        assert np.array_equal(predict_multiclass(back, x), y)

    def test_deterministic_bytes(self, tmp_path):
        x, y = separable_clusters(13)
        model = train_svm(x, y, c=10.0, gamma=0.5)
        save_svm(model, tmp_path / "a.bin")
        save_svm(model, tmp_path / "b.bin")
        assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()
