"""Confusion-matrix metrics, ROC/AUC and tie-corrected Spearman correlation.

The positive class is survival (``Operating Status == 1``). A false positive
is a failed platform predicted to survive, which is the costly error, so the
false acceptance rate (FAR) gets special treatment when a model never predicts
a positive.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    tn: int
    fp: int
    fn: int

    def __post_init__(self):
        for name in ("tp", "tn", "fp", "fn"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


@dataclass(frozen=True)
class MetricsBundle:
    accuracy: float
    precision: float
    recall: float
    f1: float
    far: float
    auc: Optional[float] = None

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsBundle":
        return cls(**{k: d.get(k) for k in ("accuracy", "precision", "recall", "f1", "far", "auc")})


@dataclass(frozen=True)
class RocCurve:
    """ROC points as (far, recall) pairs from (0, 0) to (1, 1)."""

    far: np.ndarray
    recall: np.ndarray

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.far.tolist(), self.recall.tolist()))

    def trapezoid_area(self) -> float:
        dx = np.diff(self.far)
        return float(np.sum(dx * (self.recall[1:] + self.recall[:-1]) / 2.0))


def _binary_vector(v, name: str) -> np.ndarray:
    a = np.asarray(v)
    if a.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if not np.all((a == 0) | (a == 1)):
        raise ValueError(f"{name} must contain only 0/1 values")
    return a.astype(np.int64)


def confusion_matrix(actual, predicted) -> ConfusionMatrix:
    """Count TP/TN/FP/FN with survival (1) as the positive class."""
    a = _binary_vector(actual, "actual")
    p = _binary_vector(predicted, "predicted")
    if a.shape != p.shape:
        raise ValueError(f"length mismatch: {a.size} actual vs {p.size} predicted")
    if a.size == 0:
        raise ValueError("cannot build a confusion matrix from empty vectors")
    tp = int(np.sum((a == 1) & (p == 1)))
    tn = int(np.sum((a == 0) & (p == 0)))
    fp = int(np.sum((a == 0) & (p == 1)))
    fn = int(np.sum((a == 1) & (p == 0)))
    return ConfusionMatrix(tp=tp, tn=tn, fp=fp, fn=fn)


def classification_metrics(cm: ConfusionMatrix, auc: Optional[float] = None) -> MetricsBundle:
    """Accuracy, precision, recall, F1 and FAR from a confusion matrix.

    Degenerate cases:

    * no predicted positives (``tp + fp == 0``): ``far = 1`` and ``precision = 0``.
      A zero FAR here would be indistinguishable from a perfect model.
    * no actual positives: ``recall = 0``.
    * ``precision + recall == 0``: ``f1 = 0``.
    * no actual negatives (and some predicted positive): ``far = 0``.
    """
    total = cm.total
    if total == 0:
        raise ValueError("confusion matrix is empty")
    tp, tn, fp, fn = cm.tp, cm.tn, cm.fp, cm.fn

    accuracy = (tp + tn) / total
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    if tp + fp == 0:
        far = 1.0
    elif fp + tn == 0:
        far = 0.0
    else:
        far = fp / (fp + tn)
    return MetricsBundle(accuracy=accuracy, precision=precision, recall=recall, f1=f1, far=far, auc=auc)


def average_ranks(x) -> np.ndarray:
    """1-based ranks with tied values sharing the mean of their positions."""
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    # boundaries of runs of equal values in sorted order
    new_run = np.empty(n, dtype=bool)
    new_run[:1] = True
    new_run[1:] = xs[1:] != xs[:-1]
    starts = np.flatnonzero(new_run)
    ends = np.append(starts[1:], n)
    run_rank = (starts + ends + 1) / 2.0  # mean of 1-based positions start+1..end
    run_id = np.cumsum(new_run) - 1
    ranks = np.empty(n, dtype=np.float64)
    ranks[order] = run_rank[run_id]
    return ranks


def _check_both_classes(a: np.ndarray):
    n_pos = int(a.sum())
    if n_pos == 0 or n_pos == a.size:
        raise ValueError("ROC/AUC needs both classes present")
    return n_pos, a.size - n_pos


def auc_score(actual, scores) -> float:
    """Mann-Whitney AUC: P(random positive outscores random negative), ties count 1/2."""
    a = _binary_vector(actual, "actual")
    s = np.asarray(scores, dtype=np.float64)
    if a.shape != s.shape:
        raise ValueError("actual and scores must have equal length")
    n_pos, n_neg = _check_both_classes(a)
    r = average_ranks(s)
    u = r[a == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def roc_curve(actual, scores) -> RocCurve:
    a = _binary_vector(actual, "actual")
    s = np.asarray(scores, dtype=np.float64)
    if a.shape != s.shape:
        raise ValueError("actual and scores must have equal length")
    n_pos, n_neg = _check_both_classes(a)

    order = np.argsort(-s, kind="mergesort")
    s_sorted = s[order]
    a_sorted = a[order]
    # one threshold per distinct score, so tied rows move together
    last_of_run = np.append(s_sorted[1:] != s_sorted[:-1], True)
    tps = np.cumsum(a_sorted)[last_of_run]
    fps = np.cumsum(1 - a_sorted)[last_of_run]
    far = np.concatenate(([0.0], fps / n_neg))
    recall = np.concatenate(([0.0], tps / n_pos))
    return RocCurve(far=far, recall=recall)


def roc_auc(actual, scores) -> tuple[RocCurve, float]:
    return roc_curve(actual, scores), auc_score(actual, scores)


def spearman(x, y) -> float:
    """Pearson correlation of average ranks."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 1 or x.shape != y.shape:
        raise ValueError("x and y must be 1-D vectors of equal length")
    if x.size < 2:
        raise ValueError("spearman needs at least two observations")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise ValueError("spearman is undefined for a constant vector")
    rx = average_ranks(x)
    ry = average_ranks(y)
    dx = rx - rx.mean()
    dy = ry - ry.mean()
    rho = float(np.dot(dx, dy) / np.sqrt(np.dot(dx, dx) * np.dot(dy, dy)))
    return min(1.0, max(-1.0, rho))


def evaluate(actual, scores, labels) -> MetricsBundle:
    """Metrics bundle from held-out labels plus AUC from scores when defined."""
    cm = confusion_matrix(actual, labels)
    a = np.asarray(actual)
    auc = auc_score(a, scores) if 0 < a.sum() < a.size else None
    return classification_metrics(cm, auc=auc)
