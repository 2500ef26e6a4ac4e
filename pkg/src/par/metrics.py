"""Label-based evaluation metrics for multi-label attribute models.

The headline metric is mean accuracy (mA): for each label, average the
positive recall TP/P and negative recall TN/N, then average over labels.
A label side with no samples (P = 0 or N = 0) counts as recall 1.0, the
vacuous-truth convention, so degenerate columns cannot drag the mean down.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatch


@dataclass(frozen=True)
class ConfusionCounts:
    """Per-label confusion counts over a batch; each vector has length L."""

    tp: np.ndarray
    fp: np.ndarray
    tn: np.ndarray
    fn: np.ndarray

    @property
    def num_samples(self) -> int:
        return int(self.tp[0] + self.fp[0] + self.tn[0] + self.fn[0]) if self.tp.size else 0


@dataclass(frozen=True)
class MetricReport:
    mA: float
    per_label_pos_recall: np.ndarray
    per_label_neg_recall: np.ndarray
    threshold: float

    @property
    def per_label_mean(self) -> np.ndarray:
        return 0.5 * (self.per_label_pos_recall + self.per_label_neg_recall)


def _check_pair(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or a.shape != b.shape:
        raise ShapeMismatch(f"predictions {a.shape} vs targets {b.shape}; both must be (B, L)")
    if a.shape[0] == 0:
        raise ShapeMismatch("need at least one evaluated sample")
    return a, b


def confusion_counts(predictions: np.ndarray, targets: np.ndarray) -> ConfusionCounts:
    """Count TP/FP/TN/FN per label for binary predictions."""
    p, y = _check_pair(predictions, targets)
    pos = y == 1.0
    pred = p == 1.0
    return ConfusionCounts(
        tp=np.sum(pos & pred, axis=0),
        fp=np.sum(~pos & pred, axis=0),
        tn=np.sum(~pos & ~pred, axis=0),
        fn=np.sum(pos & ~pred, axis=0),
    )


def mean_accuracy(
    probabilities: np.ndarray, targets: np.ndarray, threshold: float = 0.5
) -> MetricReport:
    """Label-based mean accuracy of thresholded probabilities.

    Predictions are probability >= threshold. Feeding already-binary 0/1
    predictions with the default threshold yields the same report as the
    probabilities they came from.
    """
    probs, y = _check_pair(probabilities, targets)
    if np.any(probs < 0.0) or np.any(probs > 1.0):
        raise ValueError("probabilities must lie in [0, 1]")
    if not np.all((y == 0.0) | (y == 1.0)):
        raise ShapeMismatch("targets must be binary")

    preds = (probs >= threshold).astype(np.float64)
    counts = confusion_counts(preds, y)
    p = counts.tp + counts.fn
    n = counts.tn + counts.fp
    with np.errstate(invalid="ignore"):
        pos_recall = np.where(p > 0, counts.tp / np.maximum(p, 1), 1.0)
        neg_recall = np.where(n > 0, counts.tn / np.maximum(n, 1), 1.0)
    return MetricReport(
        mA=float(np.mean(0.5 * (pos_recall + neg_recall))),
        per_label_pos_recall=pos_recall,
        per_label_neg_recall=neg_recall,
        threshold=threshold,
    )
