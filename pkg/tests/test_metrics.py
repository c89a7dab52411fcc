"""Confusion matrices, precision/recall/accuracy against hand counts."""

import math

import numpy as np
import pytest

from vocalfatigue.errors import InvalidValue, LengthMismatch
from vocalfatigue.metrics import (
    ConfusionMatrix,
    confusion_csv,
    confusion_matrix,
    format_table,
    score,
)


class TestConfusionMatrix:
    def test_hand_counted(self):
        cm = confusion_matrix([0, 0, 1, 1], [0, 1, 1, 1])
        assert cm.counts.tolist() == [[1, 1], [0, 2]]
        assert cm.total == 4

    def test_row_sums_are_support(self):
        rng = np.random.default_rng(0)
        y_true = rng.integers(0, 3, 200)
        y_pred = rng.integers(0, 3, 200)
        cm = confusion_matrix(y_true, y_pred, n_classes=3)
        assert cm.counts.sum(axis=1).tolist() == np.bincount(y_true, minlength=3).tolist()

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            confusion_matrix([0, 1], [0])

    def test_labels_above_k(self):
        with pytest.raises(InvalidValue):
            confusion_matrix([0, 3], [0, 1], n_classes=2)

    def test_negative_counts_rejected(self):
        with pytest.raises(InvalidValue):
            ConfusionMatrix(np.array([[1, -1], [0, 2]]))


class TestScore:
    def test_perfect_prediction(self):
        report = score([0, 1, 2, 1], [0, 1, 2, 1])
        assert report.accuracy == 1.0
        assert report.precision == (1.0, 1.0, 1.0)
        assert report.recall == (1.0, 1.0, 1.0)

    def test_documented_four_sample_example(self):
        report = score([0, 0, 1, 1], [0, 1, 1, 1])
        assert report.confusion.counts.tolist() == [[1, 1], [0, 2]]
        assert report.precision == (1.0, 2.0 / 3.0)
        assert report.recall == (0.5, 1.0)
        assert report.accuracy == 0.75

    def test_undefined_precision_is_nan_not_zero(self):
        # Class 1 is never predicted: its precision has a zero denominator.
        report = score([0, 1], [0, 0])
        assert math.isnan(report.precision[1])
        assert report.recall[1] == 0.0
        doc = report.to_json_dict()
        assert doc["precision"][1] is None

    def test_micro_recall_equals_accuracy(self):
        rng = np.random.default_rng(3)
        y_true = rng.integers(0, 3, 500)
        y_pred = rng.integers(0, 3, 500)
        report = score(y_true, y_pred, n_classes=3)
        weights = report.confusion.counts.sum(axis=1)
        micro = float(np.nansum(np.asarray(report.recall) * weights) / weights.sum())
        assert micro == pytest.approx(report.accuracy, abs=1e-12)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(4)
        y_true = rng.integers(0, 2, 100)
        y_pred = rng.integers(0, 2, 100)
        perm = rng.permutation(100)
        a = score(y_true, y_pred)
        b = score(y_true[perm], y_pred[perm])
        assert a.accuracy == b.accuracy
        assert a.precision == b.precision
        assert a.recall == b.recall
        assert np.array_equal(a.confusion.counts, b.confusion.counts)


class TestFormatting:
    def test_table_has_two_decimals(self):
        report = score([0, 0, 1, 1], [0, 1, 1, 1])
        table = format_table(report)
        assert "0.75" in table
        assert "Prec NF" in table and "Rec F" in table and "Acc." in table

    def test_json_has_four_decimals(self):
        report = score([0, 0, 1, 1], [0, 1, 1, 1])
        doc = report.to_json_dict()
        assert doc["precision"] == [1.0, 0.6667]
        assert doc["accuracy"] == 0.75

    def test_csv_shape_three_class(self):
        report = score([0, 1, 2, 2], [0, 1, 1, 2], n_classes=3)
        text = confusion_csv(report.confusion)
        lines = text.strip().split("\n")
        assert len(lines) == 4
        assert lines[0] == "true\\pred,NF,F,Mid"
