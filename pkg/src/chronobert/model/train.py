"""Training loops: self-supervised pretraining and supervised fine-tuning."""

from __future__ import annotations

import math

import numpy as np

from ..data.store import EventStore
from ..errors import TrainingError, ValidationError
from ..estimator import ParamsMixin
from ..rng import derive_rng
from ..sequence.builder import (
    FINETUNE_WINDOW,
    PRETRAIN_WINDOW,
    RepresentationVariant,
    TokenSequence,
    build_sequence,
    window,
)
from ..sequence.vocab import VisitTypeVocabulary, Vocabulary
from ..tensor import AdamState, LrSchedule, adam_step, cosine_lr, zero_grads
from .config import ModelConfig
from .network import Batch, finetune_loss, predict_batch, pretrain_loss
from .weights import ModelWeights

MIN_EVENTS_DEFAULT = 6


def collect_gradients(weights: ModelWeights) -> dict[str, np.ndarray]:
    return {name: t.grad for name, t in weights.tensors.items() if t.grad is not None}


def _check_loss(value: float, context: str) -> None:
    if not math.isfinite(value):
        raise TrainingError(f"{context}: loss became non-finite ({value})")


def eligible_person_ids(store: EventStore, min_events: int = MIN_EVENTS_DEFAULT) -> list[str]:
    """Patients with enough recorded events to yield a useful sequence."""
    return [pid for pid in store.person_ids
            if len(store.events_of_person(pid)) >= min_events]


class SequencePretrainer(ParamsMixin):
    """Learns temporal concept representations from unlabeled visit history.

    ``fit`` builds the vocabularies from the store, tokenizes every eligible
    patient, and optimizes the masked-token objective (plus the visit-type
    objective when enabled). Fitted state lives in ``weights_``, ``vocab_``,
    ``type_vocab_``, ``config_``, and ``loss_trace_``.
    """

    def __init__(self, variant: str = "cehr", n_layers: int = 5, n_heads: int = 8,
                 d_model: int = 128, d_ff: int = 512, dropout: float = 0.1,
                 time2vec_dim: int = 16, context_window: int = 300,
                 embedding_mode: str = "concat_fc", vtp_enabled: bool = True,
                 vtp_loss_weight: float = 1.0, vtp_self_attention: bool = True,
                 mask_artificial: bool = True, epochs: int = 5, batch_size: int = 32,
                 initial_lr: float = 2e-4, eta_min: float = 0.0,
                 min_events: int = MIN_EVENTS_DEFAULT, seed: int = 0):
        self.variant = variant
        self.n_layers = n_layers
        self.n_heads = n_heads
        self.d_model = d_model
        self.d_ff = d_ff
        self.dropout = dropout
        self.time2vec_dim = time2vec_dim
        self.context_window = context_window
        self.embedding_mode = embedding_mode
        self.vtp_enabled = vtp_enabled
        self.vtp_loss_weight = vtp_loss_weight
        self.vtp_self_attention = vtp_self_attention
        self.mask_artificial = mask_artificial
        self.epochs = epochs
        self.batch_size = batch_size
        self.initial_lr = initial_lr
        self.eta_min = eta_min
        self.min_events = min_events
        self.seed = seed

    # -- setup ---------------------------------------------------------------

    def _model_config(self, vocab: Vocabulary, type_vocab: VisitTypeVocabulary) -> ModelConfig:
        config = ModelConfig(
            vocab_size=len(vocab), n_visit_types=len(type_vocab),
            n_layers=self.n_layers, n_heads=self.n_heads, d_model=self.d_model,
            d_ff=self.d_ff, dropout=self.dropout, time2vec_dim=self.time2vec_dim,
            context_window=self.context_window, embedding_mode=self.embedding_mode,
            vtp_enabled=self.vtp_enabled, vtp_loss_weight=self.vtp_loss_weight,
            vtp_self_attention=self.vtp_self_attention, seed=self.seed)
        config.validate()
        return config

    def prepare(self, store: EventStore) -> "SequencePretrainer":
        """Build vocabularies and freshly initialized weights without training.

        This is the starting point ``fit`` trains from, and doubles as the
        random-initialization baseline when used on its own.
        """
        if self.batch_size < 1:
            raise ValidationError([f"batch size must be positive, got {self.batch_size}"])
        if self.epochs < 0:
            raise ValidationError([f"epochs must be non-negative, got {self.epochs}"])
        self.vocab_ = Vocabulary(store.concept_ids())
        self.type_vocab_ = VisitTypeVocabulary(sorted({v.visit_type for v in store.all_visits()}))
        self.config_ = self._model_config(self.vocab_, self.type_vocab_)
        self.weights_ = ModelWeights.initialize(self.config_)
        self.person_ids_ = eligible_person_ids(store, self.min_events)
        if not self.person_ids_:
            raise ValidationError([f"no patients with at least {self.min_events} events"])
        self.loss_trace_: list[dict] = []
        return self

    def _sequences(self, store: EventStore) -> list[TokenSequence]:
        return [build_sequence(store, pid, RepresentationVariant(self.variant),
                               self.vocab_, self.type_vocab_)
                for pid in self.person_ids_]

    # -- training ------------------------------------------------------------

    def fit(self, store: EventStore) -> "SequencePretrainer":
        self.prepare(store)
        sequences = self._sequences(store)
        rng = derive_rng(self.seed, "pretrain")
        schedule = LrSchedule(initial_lr=self.initial_lr, eta_min=self.eta_min,
                              period_epochs=max(self.epochs, 1))
        adam = AdamState.for_params(self.weights_.tensors)
        step = 0
        for epoch in range(self.epochs):
            lr = cosine_lr(schedule, epoch)
            order = rng.permutation(len(sequences))
            for lo in range(0, len(order), self.batch_size):
                rows = [sequences[i] for i in order[lo:lo + self.batch_size]]
                windowed = [window(s, self.context_window, PRETRAIN_WINDOW, rng) for s in rows]
                batch = Batch.from_sequences(windowed)
                loss, parts = pretrain_loss(batch, self.weights_, self.config_, rng,
                                            training=True, mask_artificial=self.mask_artificial)
                _check_loss(parts["total_loss"], f"pretraining step {step}")
                loss.backward()
                adam_step(self.weights_.tensors, collect_gradients(self.weights_), adam, lr)
                zero_grads(self.weights_.tensors)
                self.loss_trace_.append({"step": step, "epoch": epoch, "lr": lr, **parts})
                step += 1
        return self

    # -- fitted accessors ----------------------------------------------------

    def _require_fitted(self) -> None:
        if not hasattr(self, "weights_"):
            raise ValidationError(["pretrainer is not fitted; call fit or prepare first"])

    def interval_token_embeddings(self) -> tuple[list[str], np.ndarray]:
        """(token names, rows of the concept table) for the interval tokens."""
        self._require_fitted()
        ids = self.vocab_.interval_token_ids()
        names = [self.vocab_.token_of(i) for i in ids]
        return names, self.weights_["concept_emb"].data[ids].astype(np.float64)

    def save(self, weights_path, vocab_path, type_vocab_path) -> None:
        self._require_fitted()
        self.weights_.save(weights_path)
        self.vocab_.save(vocab_path)
        self.type_vocab_.save(type_vocab_path)

    def load_fitted(self, weights_path, vocab_path, type_vocab_path) -> "SequencePretrainer":
        """Populate fitted state from files written by ``save``."""
        self.vocab_ = Vocabulary.load(vocab_path)
        self.type_vocab_ = VisitTypeVocabulary.load(type_vocab_path)
        self.config_ = self._model_config(self.vocab_, self.type_vocab_)
        self.weights_ = ModelWeights.load(weights_path, self.config_)
        self.loss_trace_ = []
        return self


class OutcomeClassifier(ParamsMixin):
    """Binary event-risk classifier fine-tuned from a prepared pretrainer.

    The full network (embeddings, encoder, recurrent head) is updated with a
    small constant learning rate; training stops early once validation loss
    stops improving and the best-validation weights are restored.
    """

    def __init__(self, pretrainer: SequencePretrainer, epochs: int = 10,
                 batch_size: int = 32, lr: float = 1e-4, patience: int = 1,
                 seed: int = 0):
        self.pretrainer = pretrainer
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.patience = patience
        self.seed = seed

    def _windowed(self, sequences: list[TokenSequence]) -> list[TokenSequence]:
        return [window(s, self.config_.context_window, FINETUNE_WINDOW) for s in sequences]

    def _mean_loss(self, sequences: list[TokenSequence], labels: np.ndarray) -> float:
        """Example-weighted evaluation loss, dropout off."""
        total = 0.0
        for lo in range(0, len(sequences), self.batch_size):
            chunk = sequences[lo:lo + self.batch_size]
            batch = Batch.from_sequences(chunk)
            loss = finetune_loss(batch, labels[lo:lo + self.batch_size], self.weights_,
                                 self.config_, rng=None, training=False)
            total += float(loss.data) * len(chunk)
        return total / len(sequences)

    def fit(self, sequences: list[TokenSequence], labels,
            val_sequences: list[TokenSequence], val_labels) -> "OutcomeClassifier":
        labels = np.asarray(labels, dtype=np.float64)
        val_labels = np.asarray(val_labels, dtype=np.float64)
        if len(sequences) != labels.shape[0] or len(val_sequences) != val_labels.shape[0]:
            raise ValidationError(["labels must align with sequences"])
        if not sequences or not val_sequences:
            raise ValidationError(["fine-tuning needs non-empty train and validation sets"])
        source = self.pretrainer
        source._require_fitted()
        self.config_ = source.config_
        self.vocab_ = source.vocab_
        self.type_vocab_ = source.type_vocab_
        # fine-tune a copy so the pretrained weights stay reusable
        self.weights_ = ModelWeights(self.config_, source.weights_.snapshot())

        train_seqs = self._windowed(sequences)
        val_seqs = self._windowed(val_sequences)
        rng = derive_rng(self.seed, "finetune")
        adam = AdamState.for_params(self.weights_.tensors)
        best_val = math.inf
        best_snapshot = self.weights_.snapshot()
        stale = 0
        self.loss_trace_ = []
        for epoch in range(self.epochs):
            order = rng.permutation(len(train_seqs))
            epoch_loss, seen = 0.0, 0
            for lo in range(0, len(order), self.batch_size):
                rows = order[lo:lo + self.batch_size]
                batch = Batch.from_sequences([train_seqs[i] for i in rows])
                loss = finetune_loss(batch, labels[rows], self.weights_, self.config_,
                                     rng, training=True)
                _check_loss(float(loss.data), f"fine-tuning epoch {epoch}")
                loss.backward()
                adam_step(self.weights_.tensors, collect_gradients(self.weights_), adam, self.lr)
                zero_grads(self.weights_.tensors)
                epoch_loss += float(loss.data) * rows.size
                seen += rows.size
            val_loss = self._mean_loss(val_seqs, val_labels)
            _check_loss(val_loss, f"validation after epoch {epoch}")
            self.loss_trace_.append({"epoch": epoch, "train_loss": epoch_loss / seen,
                                     "val_loss": val_loss})
            if val_loss < best_val:
                best_val = val_loss
                best_snapshot = self.weights_.snapshot()
                stale = 0
            else:
                stale += 1
                if stale > self.patience:
                    break
        self.weights_.restore(best_snapshot)
        self.best_val_loss_ = best_val
        return self

    def decision_scores(self, sequences: list[TokenSequence]) -> np.ndarray:
        """P(event) for each sequence."""
        if not hasattr(self, "weights_"):
            raise ValidationError(["classifier is not fitted"])
        scores = []
        for lo in range(0, len(sequences), self.batch_size):
            chunk = self._windowed(sequences[lo:lo + self.batch_size])
            scores.append(predict_batch(Batch.from_sequences(chunk), self.weights_, self.config_))
        return np.concatenate(scores)

    def predict_proba(self, sequences: list[TokenSequence]) -> np.ndarray:
        positive = self.decision_scores(sequences)
        return np.column_stack([1.0 - positive, positive])

    def predict(self, sequences: list[TokenSequence]) -> np.ndarray:
        return (self.decision_scores(sequences) >= 0.5).astype(np.int64)
