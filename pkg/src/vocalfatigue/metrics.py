"""Per-class precision/recall, accuracy, and confusion matrices.

Undefined ratios (zero denominator) are reported as NaN, never silently as
zero; JSON output maps them to null.  Machine output carries 4 decimals,
human-readable tables 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidValue, LengthMismatch


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """counts[true][predicted] over K classes."""

    counts: np.ndarray

    def __post_init__(self):
        counts = np.ascontiguousarray(self.counts, dtype=np.int64)
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
            raise InvalidValue(f"counts must be square, got shape {counts.shape}")
        if (counts < 0).any():
            raise InvalidValue("counts must be nonnegative")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def n_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class ScoreReport:
    confusion: ConfusionMatrix
    precision: tuple
    recall: tuple
    accuracy: float

    def to_json_dict(self) -> dict:
        def clean(v):
            return None if math.isnan(v) else round(v, 4)

        return {
            "confusion": self.confusion.counts.tolist(),
            "precision": [clean(v) for v in self.precision],
            "recall": [clean(v) for v in self.recall],
            "accuracy": clean(self.accuracy),
        }


def confusion_matrix(y_true, y_pred, n_classes: int | None = None) -> ConfusionMatrix:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape or y_true.ndim != 1:
        raise LengthMismatch(f"y_true {y_true.shape} and y_pred {y_pred.shape} must match")
    if y_true.shape[0] < 1:
        raise InvalidValue("need at least one sample")
    if y_true.min(initial=0) < 0 or y_pred.min(initial=0) < 0:
        raise InvalidValue("labels must be nonnegative")
    k = int(max(y_true.max(), y_pred.max())) + 1 if n_classes is None else n_classes
    if max(y_true.max(), y_pred.max()) >= k:
        raise InvalidValue(f"labels exceed n_classes={k}")
    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (y_true, y_pred), 1)
    return ConfusionMatrix(counts)


def score(y_true, y_pred, n_classes: int | None = None) -> ScoreReport:
    """Per-class precision and recall plus overall accuracy."""
    cm = confusion_matrix(y_true, y_pred, n_classes)
    counts = cm.counts.astype(np.float64)
    diag = np.diag(counts)
    col = counts.sum(axis=0)
    row = counts.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        precision = np.where(col > 0, diag / col, np.nan)
        recall = np.where(row > 0, diag / row, np.nan)
    accuracy = float(diag.sum() / counts.sum())
    return ScoreReport(
        confusion=cm,
        precision=tuple(precision.tolist()),
        recall=tuple(recall.tolist()),
        accuracy=accuracy,
    )


_BINARY_NAMES = ("NF", "F")
_THREE_NAMES = ("NF", "F", "Mid")


def class_names(n_classes: int) -> tuple:
    if n_classes == 2:
        return _BINARY_NAMES
    if n_classes == 3:
        return _THREE_NAMES
    return tuple(f"class{i}" for i in range(n_classes))


def format_table(report: ScoreReport) -> str:
    """Plain-text results row: per-class precision and recall, then accuracy."""
    names = class_names(report.confusion.n_classes)

    def fmt(v):
        return " n/a" if math.isnan(v) else f"{v:.2f}"

    header_cells = [f"Prec {n}" for n in names] + [f"Rec {n}" for n in names] + ["Acc."]
    value_cells = [fmt(v) for v in report.precision] + [fmt(v) for v in report.recall]
    value_cells.append(fmt(report.accuracy))
    widths = [max(len(h), len(v)) for h, v in zip(header_cells, value_cells)]
    head = "  ".join(h.rjust(w) for h, w in zip(header_cells, widths))
    vals = "  ".join(v.rjust(w) for v, w in zip(value_cells, widths))
    return head + "\n" + vals + "\n"


def confusion_csv(cm: ConfusionMatrix) -> str:
    """Confusion matrix as CSV with named true/predicted headers."""
    names = class_names(cm.n_classes)
    lines = ["true\\pred," + ",".join(names)]
    for i, name in enumerate(names):
        lines.append(name + "," + ",".join(str(int(v)) for v in cm.counts[i]))
    return "\n".join(lines) + "\n"
