"""chronobert: time-aware BERT-style representation learning for clinical event sequences."""

from .baselines import BiLstmClassifier, LogisticFrequencyModel
from .cohort import (
    CohortDefinition,
    LabeledExample,
    build_cohort,
    load_definition,
    load_shipped_definition,
    shipped_tasks,
)
from .data import EventStore, SynthConfig, generate_synthetic, load_store
from .errors import (
    ChronobertError,
    ConfigError,
    StoreError,
    TrainingError,
    ValidationError,
)
from .eval import (
    ExperimentSettings,
    ModelSpec,
    ablation_matrix,
    make_folds,
    pca_2d,
    pr_auc,
    roc_auc,
    run_ablation,
    run_baselines,
    run_experiment,
)
from .model import OutcomeClassifier, SequencePretrainer
from .runconfig import RunConfig, load_run_config
from .sequence import RepresentationVariant, TokenSequence, Vocabulary

__version__ = "0.1.0"

__all__ = [
    "BiLstmClassifier",
    "ChronobertError",
    "CohortDefinition",
    "ConfigError",
    "EventStore",
    "ExperimentSettings",
    "LabeledExample",
    "LogisticFrequencyModel",
    "ModelSpec",
    "OutcomeClassifier",
    "RepresentationVariant",
    "RunConfig",
    "SequencePretrainer",
    "StoreError",
    "SynthConfig",
    "TokenSequence",
    "TrainingError",
    "ValidationError",
    "Vocabulary",
    "ablation_matrix",
    "build_cohort",
    "generate_synthetic",
    "load_definition",
    "load_run_config",
    "load_shipped_definition",
    "load_store",
    "make_folds",
    "pca_2d",
    "pr_auc",
    "roc_auc",
    "run_ablation",
    "run_baselines",
    "run_experiment",
    "shipped_tasks",
    "__version__",
]
