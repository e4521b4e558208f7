"""Temporal transformer model: configuration, parameters, layers, training."""

from .config import CLASSIFIER_HIDDEN, EMBEDDING_MODES, ModelConfig
from .layers import (
    LN_EPS,
    encoder_forward,
    multi_head_attention,
    sinusoidal_positions,
    temporal_concept_embedding,
    time2vec,
    visit_type_decoder_forward,
)
from .network import (
    Batch,
    finetune_logits,
    finetune_loss,
    mlm_logits,
    predict_batch,
    pretrain_loss,
)
from .train import OutcomeClassifier, SequencePretrainer, eligible_person_ids
from .weights import INIT_SIGMA, ModelWeights, build_weights

__all__ = [
    "CLASSIFIER_HIDDEN",
    "EMBEDDING_MODES",
    "INIT_SIGMA",
    "LN_EPS",
    "Batch",
    "ModelConfig",
    "ModelWeights",
    "OutcomeClassifier",
    "SequencePretrainer",
    "build_weights",
    "eligible_person_ids",
    "encoder_forward",
    "finetune_logits",
    "finetune_loss",
    "mlm_logits",
    "multi_head_attention",
    "predict_batch",
    "pretrain_loss",
    "sinusoidal_positions",
    "temporal_concept_embedding",
    "time2vec",
    "visit_type_decoder_forward",
]
