"""Validation metrics: RMSE, confusion counts, ROC/AUC, percent difference."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DomainError, ShapeError


def rmse(predicted, actual) -> float:
    """Root mean squared residual, in the target's units."""
    p = np.asarray(predicted, dtype=np.float64).ravel()
    a = np.asarray(actual, dtype=np.float64).ravel()
    if p.shape != a.shape:
        raise ShapeError(f"length mismatch: {p.size} predictions vs {a.size} actuals")
    if p.size == 0:
        raise ShapeError("rmse of an empty vector is undefined")
    return math.sqrt(float(np.mean((p - a) ** 2)))


def _labels(labels) -> np.ndarray:
    y = np.asarray(labels, dtype=np.float64).ravel()
    if not np.all((y == 0) | (y == 1)):
        raise DomainError("labels must be 0 or 1")
    return y.astype(bool)


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def confusion_at_threshold(scores, labels, threshold: float) -> ConfusionCounts:
    """Tally predictions where ``score >= threshold`` counts as positive."""
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = _labels(labels)
    if s.shape != y.shape:
        raise ShapeError(f"{s.size} scores vs {y.size} labels")
    pos = s >= threshold
    return ConfusionCounts(
        tp=int(np.sum(pos & y)),
        fp=int(np.sum(pos & ~y)),
        tn=int(np.sum(~pos & ~y)),
        fn=int(np.sum(~pos & y)),
    )


class Rate(NamedTuple):
    value: float
    degenerate: bool


def _ratio(num: int, den: int) -> Rate:
    if den == 0:
        return Rate(0.0, True)
    return Rate(num / den, False)


def recall(c: ConfusionCounts, with_flag: bool = False):
    """True positive rate; 0 when there are no positives (flagged)."""
    r = _ratio(c.tp, c.tp + c.fn)
    return r if with_flag else r.value


def fallout(c: ConfusionCounts, with_flag: bool = False):
    """False positive rate; 0 when there are no negatives (flagged)."""
    r = _ratio(c.fp, c.fp + c.tn)
    return r if with_flag else r.value


@dataclass(frozen=True)
class RocCurve:
    fallout: np.ndarray
    recall: np.ndarray
    thresholds: np.ndarray

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.fallout.tolist(), self.recall.tolist()))


def roc_curve(scores, labels) -> RocCurve:
    """Sweep one threshold per distinct score, highest first.

    Equal scores cross the threshold together, so ties contribute a single
    diagonal segment.  The first point is (0, 0) and the last (1, 1).
    """
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = _labels(labels)
    if s.shape != y.shape:
        raise ShapeError(f"{s.size} scores vs {y.size} labels")
    n_pos = int(y.sum())
    n_neg = int(y.size - n_pos)
    if n_pos == 0:
        raise DomainError("roc_curve needs at least one positive label (class 1 missing)")
    if n_neg == 0:
        raise DomainError("roc_curve needs at least one negative label (class 0 missing)")

    order = np.argsort(-s, kind="mergesort")
    s_sorted = s[order]
    y_sorted = y[order]
    tp = np.cumsum(y_sorted)
    fp = np.cumsum(~y_sorted)
    # last index of each run of equal scores
    last = np.r_[np.nonzero(np.diff(s_sorted))[0], s_sorted.size - 1]
    fpr = np.r_[0.0, fp[last] / n_neg]
    tpr = np.r_[0.0, tp[last] / n_pos]
    thr = np.r_[np.inf, s_sorted[last]]
    if fpr[-1] != 1.0 or tpr[-1] != 1.0:
        fpr = np.r_[fpr, 1.0]
        tpr = np.r_[tpr, 1.0]
        thr = np.r_[thr, -np.inf]
    return RocCurve(fpr, tpr, thr)


def auc(curve: RocCurve) -> float:
    """Trapezoidal area under an ROC curve."""
    x, y = curve.fallout, curve.recall
    return float(np.sum(np.diff(x) * (y[1:] + y[:-1]) / 2.0))


def roc_auc(scores, labels) -> float:
    return auc(roc_curve(scores, labels))


def write_roc_csv(curve: RocCurve, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["fallout", "recall"])
        for f, r in curve.points:
            w.writerow([repr(f), repr(r)])


def percent_difference(a: float, b: float) -> float:
    """``100 * |a - b|`` over the mean of ``a`` and ``b``."""
    if a + b == 0:
        raise DomainError("percent difference undefined when a + b == 0")
    return 100.0 * abs(a - b) / ((a + b) / 2.0)
