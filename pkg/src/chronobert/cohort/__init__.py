"""Declarative cohort construction and baseline feature extraction."""

from .definition import (
    CohortDefinition,
    CountRule,
    IndexRule,
    OutcomeRule,
    definition_from_dict,
    load_concept_set,
    load_definition,
    load_shipped_definition,
    packaged_definition_dir,
    shipped_tasks,
)
from .engine import (
    LabeledExample,
    build_cohort,
    build_example,
    cohort_to_csv_bytes,
    example_timeline,
    label_counts,
)
from .features import (
    design_matrix,
    feature_vocabulary,
    rollup_counts,
    rollup_features,
)

__all__ = [
    "CohortDefinition",
    "CountRule",
    "IndexRule",
    "LabeledExample",
    "OutcomeRule",
    "build_cohort",
    "build_example",
    "cohort_to_csv_bytes",
    "definition_from_dict",
    "design_matrix",
    "example_timeline",
    "feature_vocabulary",
    "label_counts",
    "load_concept_set",
    "load_definition",
    "load_shipped_definition",
    "packaged_definition_dir",
    "rollup_counts",
    "rollup_features",
    "shipped_tasks",
]
