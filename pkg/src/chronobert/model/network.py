"""Wiring the blocks into trainable objectives.

``Batch`` stacks per-patient channel arrays and trims shared padding;
``pretrain_loss`` runs the masked-token and visit-type objectives;
``finetune_forward`` pools the encoder with the recurrent head into a
single event-risk logit per patient.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ValidationError
from ..sequence.builder import TokenSequence
from ..sequence.masking import apply_token_mask, apply_visit_type_mask, maskable_positions
from ..tensor import (
    Tensor,
    bilstm_forward,
    binary_cross_entropy_with_logits,
    masked_cross_entropy,
    matmul,
    reshape,
    transpose_last,
)
from .config import ModelConfig
from .layers import encoder_forward, temporal_concept_embedding, visit_type_decoder_forward
from .weights import ModelWeights

LENGTH_MULTIPLE = 8


def _round_up(n: int, multiple: int) -> int:
    return ((n + multiple - 1) // multiple) * multiple


@dataclass
class Batch:
    """Stacked sequence channels for one optimizer step."""

    token_ids: np.ndarray
    time_years: np.ndarray
    age_years: np.ndarray
    visit_segment: np.ndarray
    visit_type_ids: np.ndarray
    attention_mask: np.ndarray
    person_ids: list[str] = field(default_factory=list)

    @property
    def size(self) -> int:
        return int(self.token_ids.shape[0])

    @property
    def length(self) -> int:
        return int(self.token_ids.shape[1])

    def lengths(self) -> np.ndarray:
        """Real (unpadded) length of each row."""
        return self.attention_mask.sum(axis=1).astype(np.int64)

    @classmethod
    def from_sequences(cls, sequences: list[TokenSequence]) -> "Batch":
        """Stack equally-windowed sequences, trimming shared padding.

        Rows must already share a window length; the batch keeps only the
        longest real prefix rounded up to a multiple of 8 so attention work
        scales with content rather than the configured window.
        """
        if not sequences:
            raise ValidationError(["cannot batch zero sequences"])
        window = len(sequences[0])
        for seq in sequences:
            if len(seq) != window:
                raise ValidationError([f"sequence lengths differ: {len(seq)} vs {window}"])
        longest = max(seq.n_real() for seq in sequences)
        keep = min(window, _round_up(longest, LENGTH_MULTIPLE))
        return cls(
            token_ids=np.stack([s.token_ids[:keep] for s in sequences]),
            time_years=np.stack([s.time_years[:keep] for s in sequences]),
            age_years=np.stack([s.age_years[:keep] for s in sequences]),
            visit_segment=np.stack([s.visit_segment[:keep] for s in sequences]),
            visit_type_ids=np.stack([s.visit_type_ids[:keep] for s in sequences]),
            attention_mask=np.stack([s.attention_mask[:keep] for s in sequences]),
            person_ids=[s.person_id for s in sequences],
        )


def mlm_logits(encoded: Tensor, weights: ModelWeights) -> Tensor:
    """Token logits with the output projection tied to the input embedding."""
    return matmul(encoded, transpose_last(weights["concept_emb"])) + weights["mlm_bias"]


def pretrain_loss(batch: Batch, weights: ModelWeights, config: ModelConfig,
                  rng: np.random.Generator, training: bool = True,
                  mask_artificial: bool = True):
    """Joint masked-token / masked-visit-type loss for one batch.

    Returns ``(loss, parts)`` where ``loss`` is the graph tensor
    ``mlm + weight * vtp`` and ``parts`` holds float components for logging.
    """
    maskable = maskable_positions(batch.token_ids, batch.attention_mask, mask_artificial)
    masked_tokens, token_labels, token_weights = apply_token_mask(
        batch.token_ids, maskable, config.vocab_size, rng)

    embedded = temporal_concept_embedding(
        masked_tokens, batch.time_years, batch.age_years, batch.visit_segment,
        weights, config)
    encoded = encoder_forward(embedded, batch.attention_mask, weights, config,
                              rng=rng, training=training)
    token_loss = masked_cross_entropy(mlm_logits(encoded, weights), token_labels, token_weights)

    parts = {"mlm_loss": float(token_loss.data)}
    if not config.vtp_enabled:
        parts["vtp_loss"] = 0.0
        parts["total_loss"] = parts["mlm_loss"]
        return token_loss, parts

    masked_types, type_labels, type_weights = apply_visit_type_mask(batch.visit_type_ids, rng)
    type_logits = visit_type_decoder_forward(
        encoded, masked_types, batch.time_years, batch.age_years,
        batch.attention_mask, weights, config, rng=rng, training=training)
    type_loss = masked_cross_entropy(type_logits, type_labels, type_weights)

    loss = token_loss + type_loss * config.vtp_loss_weight
    parts["vtp_loss"] = float(type_loss.data)
    parts["total_loss"] = float(loss.data)
    return loss, parts


def finetune_logits(batch: Batch, weights: ModelWeights, config: ModelConfig,
                    rng: np.random.Generator | None = None,
                    training: bool = False) -> Tensor:
    """Per-patient risk logits (B,): encoder -> bidirectional LSTM -> dense."""
    embedded = temporal_concept_embedding(
        batch.token_ids, batch.time_years, batch.age_years, batch.visit_segment,
        weights, config)
    encoded = encoder_forward(embedded, batch.attention_mask, weights, config,
                              rng=rng, training=training)
    recurrent = {name: tensor for name, tensor in weights.subset("clf").items()
                 if not name.startswith("out.")}
    pooled = bilstm_forward(encoded, recurrent, batch.lengths())
    logits = matmul(pooled, weights["clf.out.w"]) + weights["clf.out.b"]
    return reshape(logits, (batch.size,))


def finetune_loss(batch: Batch, labels: np.ndarray, weights: ModelWeights,
                  config: ModelConfig, rng: np.random.Generator,
                  training: bool = True) -> Tensor:
    logits = finetune_logits(batch, weights, config, rng=rng, training=training)
    return binary_cross_entropy_with_logits(logits, np.asarray(labels, dtype=np.float64))


def predict_batch(batch: Batch, weights: ModelWeights, config: ModelConfig) -> np.ndarray:
    """Event probabilities (B,) with dropout off."""
    logits = finetune_logits(batch, weights, config, training=False)
    return 1.0 / (1.0 + np.exp(-logits.data.astype(np.float64)))
