"""Classification metrics: accuracy / sensitivity / specificity and ROC AUC."""

from __future__ import annotations

import numpy as np

from .errors import MetricError


def _validate(scores, labels):
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if scores.shape != labels.shape or scores.ndim != 1 or scores.size == 0:
        raise MetricError("scores and labels must be equal-length nonempty 1-D sequences")
    if not (np.any(labels == 1) and np.any(labels == 0)):
        raise MetricError("both classes must be present")
    return scores, labels


def confusion_metrics(scores, labels, threshold: float = 0.5) -> dict:
    """Accuracy, sensitivity and specificity at `threshold` (>= is positive)."""
    scores, labels = _validate(scores, labels)
    pred = scores >= threshold
    pos, neg = labels == 1, labels == 0
    tp = int(np.sum(pred & pos))
    tn = int(np.sum(~pred & neg))
    fp = int(np.sum(pred & neg))
    fn = int(np.sum(~pred & pos))
    return {
        "accuracy": (tp + tn) / labels.size,
        "sensitivity": tp / (tp + fn),
        "specificity": tn / (tn + fp),
    }


def roc_auc(scores, labels) -> float:
    """Rank-based (Mann-Whitney) AUC: the fraction of (positive, negative)
    pairs where the positive scores higher, ties counted as half."""
    scores, labels = _validate(scores, labels)
    order = np.argsort(scores, kind="mergesort")
    sorted_scores = scores[order]
    ranks = np.empty(scores.size, dtype=np.float64)
    i = 0
    while i < scores.size:
        j = i
        while j + 1 < scores.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0  # average rank, 1-based
        i = j + 1
    n_pos = int(np.sum(labels == 1))
    n_neg = labels.size - n_pos
    rank_sum = float(ranks[labels == 1].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)
