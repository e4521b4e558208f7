"""Frequency features over rolled-up concepts for the linear baseline.

Concepts with an entry in the hierarchy map are replaced by their rollup
code; unmapped concepts are kept verbatim. A feature is the count of its
(rolled-up) concept among the example's feature events.
"""

from __future__ import annotations

from collections import Counter

import numpy as np

from .engine import LabeledExample


def rollup_counts(example: LabeledExample, hierarchy: dict[str, str]) -> dict[str, int]:
    """Sparse count vector: rolled-up concept -> occurrences in the window."""
    counts = Counter(hierarchy.get(e.concept_id, e.concept_id)
                     for e in example.feature_events)
    return dict(counts)


def feature_vocabulary(examples, hierarchy: dict[str, str]) -> list[str]:
    """Sorted union of rolled-up concepts across all examples."""
    names = set()
    for example in examples:
        names.update(rollup_counts(example, hierarchy))
    return sorted(names)


def rollup_features(example: LabeledExample, hierarchy: dict[str, str],
                    feature_names) -> np.ndarray:
    """Dense count vector aligned to ``feature_names``; unseen names count 0."""
    counts = rollup_counts(example, hierarchy)
    return np.array([counts.get(name, 0) for name in feature_names], dtype=np.float64)


def design_matrix(examples, hierarchy: dict[str, str],
                  feature_names=None) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """(X, y, feature_names) for a list of labeled examples."""
    if feature_names is None:
        feature_names = feature_vocabulary(examples, hierarchy)
    x = np.zeros((len(examples), len(feature_names)), dtype=np.float64)
    for i, example in enumerate(examples):
        x[i] = rollup_features(example, hierarchy, feature_names)
    y = np.array([example.label for example in examples], dtype=np.float64)
    return x, y, list(feature_names)
