"""Stratified Monte-Carlo fold plans and nested few-shot subsampling.

Each fold is an independent shuffled 75:10:15 split of the same examples,
stratified by label so rare outcomes stay represented in every piece. Split
sizes come from largest-remainder rounding: overall sizes first (within one
example of the exact fractional split), then per-class cell counts
constrained to those totals.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError
from ..rng import derive_rng

N_FOLDS = 4
SPLIT_FRACTIONS = (0.75, 0.10, 0.15)
SPLIT_NAMES = ("train", "val", "test")
MIN_EXAMPLES = 20
DEFAULT_FRACTIONS = (0.05, 0.10, 0.20, 0.40, 0.80)


@dataclass(frozen=True)
class Fold:
    """One train/val/test partition, as index tuples into the example list."""

    train: tuple[int, ...]
    val: tuple[int, ...]
    test: tuple[int, ...]

    def digest(self) -> str:
        """Stable fingerprint, for asserting models saw identical splits."""
        payload = repr((self.train, self.val, self.test)).encode()
        return hashlib.sha256(payload).hexdigest()[:16]


@dataclass(frozen=True)
class FoldPlan:
    folds: tuple[Fold, ...]
    seed: int

    def __iter__(self):
        return iter(self.folds)

    def __len__(self) -> int:
        return len(self.folds)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _largest_remainder(total: int, fractions) -> list[int]:
    """Integer shares of ``total`` proportional to ``fractions``, summing exactly."""
    exact = [total * f for f in fractions]
    shares = [math.floor(e) for e in exact]
    leftover = total - sum(shares)
    order = sorted(range(len(fractions)), key=lambda i: (-(exact[i] - shares[i]), i))
    for i in order[:leftover]:
        shares[i] += 1
    return shares


def _cell_counts(class_sizes: dict, targets) -> dict:
    """Per-(class, split) counts: class rows sum to class size, split columns to targets.

    Floors of the exact quotas first, then leftover units greedily by largest
    fractional part wherever both the class row and the split column still
    have slack (a final sweep settles any units greed cannot place).
    """
    cells = {}
    row_slack = {}
    for cls, n in class_sizes.items():
        base = [math.floor(n * f) for f in SPLIT_FRACTIONS]
        for s, b in enumerate(base):
            cells[(cls, s)] = b
        row_slack[cls] = n - sum(base)
    col_slack = [targets[s] - sum(cells[(cls, s)] for cls in class_sizes)
                 for s in range(len(SPLIT_FRACTIONS))]

    by_fraction = sorted(
        ((cls, s) for cls in class_sizes for s in range(len(SPLIT_FRACTIONS))),
        key=lambda cell: (-(class_sizes[cell[0]] * SPLIT_FRACTIONS[cell[1]] % 1.0),
                          cell[0], cell[1]))
    for cls, s in by_fraction:
        if row_slack[cls] > 0 and col_slack[s] > 0:
            cells[(cls, s)] += 1
            row_slack[cls] -= 1
            col_slack[s] -= 1
    for cls in sorted(class_sizes, key=str):
        while row_slack[cls] > 0:
            s = next(i for i, slack in enumerate(col_slack) if slack > 0)
            cells[(cls, s)] += 1
            row_slack[cls] -= 1
            col_slack[s] -= 1
    return cells


def make_folds(labels, seed: int, n_folds: int = N_FOLDS) -> FoldPlan:
    """Build ``n_folds`` independent stratified 75:10:15 shuffles."""
    labels = np.asarray(labels)
    n = labels.shape[0]
    if n < MIN_EXAMPLES:
        raise ValidationError([f"fold plans need at least {MIN_EXAMPLES} examples, got {n}"])
    if not np.isin(labels, (0, 1)).all():
        raise ValidationError(["labels must be 0 or 1"])
    class_indices = {cls: np.flatnonzero(labels == cls) for cls in (0, 1)}
    class_sizes = {cls: int(idx.size) for cls, idx in class_indices.items()}
    if min(class_sizes.values()) == 0:
        raise ValidationError(["both label classes must be present to stratify"])

    targets = _largest_remainder(n, SPLIT_FRACTIONS)
    cells = _cell_counts(class_sizes, targets)
    for (cls, s), count in cells.items():
        if count == 0:
            raise ValidationError(
                [f"class {cls} would be absent from the {SPLIT_NAMES[s]} split; "
                 "the cohort is too small or too imbalanced"])

    folds = []
    for k in range(n_folds):
        rng = derive_rng(seed, "folds", str(k))
        parts = {s: [] for s in range(len(SPLIT_FRACTIONS))}
        for cls in (0, 1):
            shuffled = class_indices[cls][rng.permutation(class_sizes[cls])]
            lo = 0
            for s in range(len(SPLIT_FRACTIONS)):
                parts[s].extend(int(i) for i in shuffled[lo:lo + cells[(cls, s)]])
                lo += cells[(cls, s)]
        folds.append(Fold(train=tuple(sorted(parts[0])),
                          val=tuple(sorted(parts[1])),
                          test=tuple(sorted(parts[2]))))
    return FoldPlan(folds=tuple(folds), seed=seed)


def few_shot_sizes(n_train: int, n_positive: int, fraction: float) -> tuple[int, int]:
    """(positives, negatives) to keep for one fraction of a training set.

    Round-half-up on the total, then on the positive share, with at least one
    example of each class. Both counts are non-decreasing in the fraction,
    which is what makes prefix-based subsets nest.
    """
    if not 0.0 < fraction <= 1.0:
        raise ValidationError([f"fraction must be in (0, 1], got {fraction}"])
    total = _round_half_up(fraction * n_train)
    if total < 2:
        raise ValidationError(
            [f"fraction {fraction} of {n_train} examples leaves fewer than 2"])
    k_pos = _round_half_up(total * n_positive / n_train)
    k_pos = min(max(k_pos, 1), total - 1)
    return k_pos, total - k_pos


def few_shot_plan(fold: Fold, labels, seed: int,
                  fractions=DEFAULT_FRACTIONS, nested: bool = True) -> dict:
    """Subsampled training sets per fraction: {fraction: sorted index tuple}.

    Nested mode (default) draws one stratified shuffle and takes per-class
    prefixes, so smaller fractions are subsets of larger ones. ``nested=False``
    reshuffles independently per fraction instead.
    """
    labels = np.asarray(labels)
    train = np.asarray(fold.train, dtype=np.int64)
    train_labels = labels[train]
    pos = train[train_labels == 1]
    neg = train[train_labels == 0]
    if pos.size == 0 or neg.size == 0:
        raise ValidationError(["few-shot plans need both classes in the training set"])

    plan = {}
    base_rng = derive_rng(seed, "fewshot", "nested")
    pos_order = pos[base_rng.permutation(pos.size)]
    neg_order = neg[base_rng.permutation(neg.size)]
    for fraction in fractions:
        k_pos, k_neg = few_shot_sizes(train.size, pos.size, fraction)
        if k_pos > pos.size or k_neg > neg.size:
            raise ValidationError(
                [f"fraction {fraction} needs {k_pos} positives and {k_neg} negatives; "
                 f"the training set has {pos.size} and {neg.size}"])
        if not nested:
            rng = derive_rng(seed, "fewshot", "independent", repr(float(fraction)))
            pos_order = pos[rng.permutation(pos.size)]
            neg_order = neg[rng.permutation(neg.size)]
        chosen = np.concatenate([pos_order[:k_pos], neg_order[:k_neg]])
        plan[fraction] = tuple(int(i) for i in np.sort(chosen))
    return plan
