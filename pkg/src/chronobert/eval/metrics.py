"""Ranking metrics computed exactly from rank statistics.

``roc_auc`` is the probability a random positive outscores a random negative
(ties count half), obtained from the rank-sum identity rather than curve
integration. ``pr_auc`` is the step-summed area under the precision-recall
curve with tied scores collapsed into single thresholds, matching an
exhaustive threshold enumeration to floating-point accuracy.
"""

from __future__ import annotations

import numpy as np

from ..errors import ValidationError


def _checked(scores, labels, need_negative: bool):
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.ndim != 1 or scores.shape != labels.shape:
        raise ValidationError(["scores and labels must be equal-length vectors"])
    if scores.size == 0:
        raise ValidationError(["metrics need at least one example"])
    if not np.isin(labels, (0, 1)).all():
        raise ValidationError(["labels must be 0 or 1"])
    positive = labels == 1
    if not positive.any():
        raise ValidationError(["no positive examples"])
    if need_negative and positive.all():
        raise ValidationError(["no negative examples"])
    return scores, positive


def _average_ranks(scores: np.ndarray) -> np.ndarray:
    """1-based ranks, ties sharing the mean of their occupied positions."""
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(scores.size, dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    while i < scores.size:
        j = i
        while j + 1 < scores.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def roc_auc(scores, labels) -> float:
    """P(score+ > score-) + 0.5 * P(tie)."""
    scores, positive = _checked(scores, labels, need_negative=True)
    n_pos = int(positive.sum())
    n_neg = scores.size - n_pos
    rank_sum = float(_average_ranks(scores)[positive].sum())
    u_statistic = rank_sum - n_pos * (n_pos + 1) / 2.0
    return u_statistic / (n_pos * n_neg)


def pr_auc(scores, labels) -> float:
    """Area under precision-recall via step summation over recall increments."""
    scores, positive = _checked(scores, labels, need_negative=False)
    n_pos = int(positive.sum())

    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_positive = positive[order]

    area = 0.0
    prev_recall = 0.0
    tp = 0
    seen = 0
    i = 0
    while i < scores.size:
        j = i
        while j + 1 < scores.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        tp += int(sorted_positive[i:j + 1].sum())
        seen += j - i + 1
        recall = tp / n_pos
        precision = tp / seen
        area += (recall - prev_recall) * precision
        prev_recall = recall
        i = j + 1
    return area


def mean_std(values, ddof: int = 1) -> tuple[float, float]:
    """Mean and sample standard deviation (0.0 when a single value)."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise ValidationError(["cannot aggregate zero values"])
    std = 0.0 if arr.size <= ddof else float(arr.std(ddof=ddof))
    return float(arr.mean()), std
