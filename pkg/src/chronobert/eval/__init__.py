"""Evaluation harness: folds, metrics, experiments, ablations, reports."""

from .experiment import (
    ABLATION_SPECS,
    BILSTM_MODEL,
    LR_MODEL,
    ExperimentSettings,
    MetricReport,
    ModelSpec,
    ablation_matrix,
    att_coordinates,
    build_pretrainer,
    cohort_examples,
    example_sequences,
    pretrain_model,
    run_ablation,
    run_baselines,
    run_experiment,
    run_few_shot,
    sequence_length_rows,
)
from .folds import (
    DEFAULT_FRACTIONS,
    MIN_EXAMPLES,
    N_FOLDS,
    SPLIT_FRACTIONS,
    Fold,
    FoldPlan,
    few_shot_plan,
    few_shot_sizes,
    make_folds,
)
from .metrics import mean_std, pr_auc, roc_auc
from .pca import pca_2d
from .report import (
    METRICS_HEADER,
    OMITTED_BASELINE_NOTE,
    format_mean_std,
    metric_rows,
    metrics_csv_bytes,
    report_markdown,
    write_att_pca_csv,
    write_lengths_csv,
    write_metrics_csv,
    write_report_md,
)

__all__ = [
    "ABLATION_SPECS",
    "BILSTM_MODEL",
    "DEFAULT_FRACTIONS",
    "ExperimentSettings",
    "Fold",
    "FoldPlan",
    "LR_MODEL",
    "METRICS_HEADER",
    "MIN_EXAMPLES",
    "MetricReport",
    "ModelSpec",
    "N_FOLDS",
    "OMITTED_BASELINE_NOTE",
    "SPLIT_FRACTIONS",
    "ablation_matrix",
    "att_coordinates",
    "build_pretrainer",
    "cohort_examples",
    "example_sequences",
    "few_shot_plan",
    "few_shot_sizes",
    "format_mean_std",
    "make_folds",
    "mean_std",
    "metric_rows",
    "metrics_csv_bytes",
    "pca_2d",
    "pr_auc",
    "pretrain_model",
    "report_markdown",
    "roc_auc",
    "run_ablation",
    "run_baselines",
    "run_experiment",
    "run_few_shot",
    "sequence_length_rows",
    "write_att_pca_csv",
    "write_lengths_csv",
    "write_metrics_csv",
    "write_report_md",
]
