"""Comparison models: logistic regression on counts and a plain Bi-LSTM.

Both expose the same fit/score surface as the main classifier so the
experiment harness can swap models without special cases. The logistic
model consumes rolled-up frequency features; the Bi-LSTM consumes token
sequences (concepts only, no artificial tokens) and can warm-start its
embedding table from a pretrained concept table.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import TrainingError, ValidationError
from .estimator import ParamsMixin
from .rng import derive_rng
from .sequence.builder import FINETUNE_WINDOW, TokenSequence, window
from .tensor import (
    AdamState,
    Tensor,
    adam_step,
    add,
    bilstm_forward,
    binary_cross_entropy_with_logits,
    embedding_lookup,
    load_weights,
    matmul,
    reshape,
    save_weights,
    zero_grads,
)
from .model.network import Batch

INIT_SIGMA = 0.02


def _require_both_classes(y: np.ndarray) -> None:
    if not ((y == 0).any() and (y == 1).any()):
        raise ValidationError(["training labels must include both classes"])


def _largest_eigenvalue(gram: np.ndarray, iters: int = 200) -> float:
    """Power iteration on a symmetric PSD matrix, deterministic start."""
    v = np.ones(gram.shape[0]) / math.sqrt(gram.shape[0])
    value = 0.0
    for _ in range(iters):
        w = gram @ v
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            return 0.0
        v = w / norm
        value = norm
    return value


class LogisticFrequencyModel(ParamsMixin):
    """L2-regularized logistic regression fit by full-batch gradient descent.

    The objective is sum-of-log-losses plus ``l2/2 * ||w||^2`` (bias
    unregularized). With ``step_size=None`` the step is the inverse of the
    gradient's Lipschitz bound, which makes every iteration decrease the
    objective; iteration stops when the gradient norm drops below ``tol``.
    """

    def __init__(self, l2: float = 1.0, max_iter: int = 500, tol: float = 1e-7,
                 step_size: float | None = None):
        self.l2 = l2
        self.max_iter = max_iter
        self.tol = tol
        self.step_size = step_size

    def _gradient(self, x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, float]:
        z = x @ self.coef_ + self.intercept_
        p = 1.0 / (1.0 + np.exp(-z))
        residual = p - y
        return x.T @ residual + self.l2 * self.coef_, float(residual.sum())

    def _objective(self, x: np.ndarray, y: np.ndarray) -> float:
        z = x @ self.coef_ + self.intercept_
        # log(1 + exp(-z*t)) with t = +-1, written stably via logaddexp
        losses = np.logaddexp(0.0, np.where(y == 1, -z, z))
        return float(losses.sum()) + 0.5 * self.l2 * float(self.coef_ @ self.coef_)

    def fit(self, x, y) -> "LogisticFrequencyModel":
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if x.ndim != 2 or y.shape != (x.shape[0],):
            raise ValidationError(["x must be (n, d) with matching label vector"])
        _require_both_classes(y)
        if self.l2 < 0:
            raise ValidationError(["l2 strength must be non-negative"])

        n, d = x.shape
        self.coef_ = np.zeros(d)
        self.intercept_ = 0.0
        if self.step_size is None:
            # Lipschitz constant of the gradient over (w, b) jointly
            augmented = np.hstack([x, np.ones((n, 1))])
            lipschitz = _largest_eigenvalue(augmented.T @ augmented) / 4.0 + self.l2
            step = 1.0 / max(lipschitz, 1e-12)
        else:
            step = self.step_size

        self.loss_trace_ = [self._objective(x, y)]
        self.converged_ = False
        for _ in range(self.max_iter + 1):
            grad_w, grad_b = self._gradient(x, y)
            self.grad_norm_ = math.sqrt(float(grad_w @ grad_w) + grad_b * grad_b)
            if self.grad_norm_ <= self.tol:
                self.converged_ = True
                break
            if len(self.loss_trace_) > self.max_iter:
                break
            self.coef_ -= step * grad_w
            self.intercept_ -= step * grad_b
            self.loss_trace_.append(self._objective(x, y))
        self.n_iter_ = len(self.loss_trace_) - 1
        return self

    def _require_fitted(self) -> None:
        if not hasattr(self, "coef_"):
            raise ValidationError(["model is not fitted"])

    def decision_function(self, x) -> np.ndarray:
        self._require_fitted()
        x = np.asarray(x, dtype=np.float64)
        return x @ self.coef_ + self.intercept_

    def decision_scores(self, x) -> np.ndarray:
        """P(event); alias surface shared with the sequence classifiers."""
        return 1.0 / (1.0 + np.exp(-self.decision_function(x)))

    def predict_proba(self, x) -> np.ndarray:
        positive = self.decision_scores(x)
        return np.column_stack([1.0 - positive, positive])

    def predict(self, x) -> np.ndarray:
        return (self.decision_scores(x) >= 0.5).astype(np.int64)

    def save(self, path) -> None:
        self._require_fitted()
        save_weights(path, {"coef": self.coef_, "intercept": np.array([self.intercept_])})

    def load_fitted(self, path) -> "LogisticFrequencyModel":
        arrays = load_weights(path)
        self.coef_ = arrays["coef"].astype(np.float64)
        self.intercept_ = float(arrays["intercept"][0])
        return self


def _bilstm_weight_arrays(vocab_size: int, embedding_dim: int, hidden_size: int,
                          seed: int) -> dict[str, np.ndarray]:
    rng = derive_rng(seed, "bilstm", "init")

    def trunc(shape):
        return np.clip(rng.normal(0.0, INIT_SIGMA, size=shape),
                       -2 * INIT_SIGMA, 2 * INIT_SIGMA).astype(np.float32)

    arrays = {"emb": trunc((vocab_size, embedding_dim))}
    for direction in ("fwd", "bwd"):
        arrays[f"{direction}.wx"] = trunc((embedding_dim, 4 * hidden_size))
        arrays[f"{direction}.wh"] = trunc((hidden_size, 4 * hidden_size))
        arrays[f"{direction}.b"] = np.zeros(4 * hidden_size, dtype=np.float32)
    arrays["out.w"] = trunc((2 * hidden_size, 1))
    arrays["out.b"] = np.zeros(1, dtype=np.float32)
    return arrays


class BiLstmClassifier(ParamsMixin):
    """Embedding -> Bi-LSTM -> dense -> sigmoid over token sequences.

    Pass ``embedding_weights`` (a vocab-aligned array) to warm-start the
    embedding table from pretrained concept vectors; otherwise the table is
    randomly initialized. Early stopping mirrors the main classifier.
    """

    def __init__(self, embedding_dim: int = 128, hidden_size: int = 64,
                 context_window: int = 300, epochs: int = 10, batch_size: int = 32,
                 lr: float = 1e-4, patience: int = 1, seed: int = 0,
                 embedding_weights=None):
        self.embedding_dim = embedding_dim
        self.hidden_size = hidden_size
        self.context_window = context_window
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.patience = patience
        self.seed = seed
        self.embedding_weights = embedding_weights

    # -- construction ----------------------------------------------------------

    def _build(self, vocab_size: int) -> None:
        arrays = _bilstm_weight_arrays(vocab_size, self.embedding_dim,
                                       self.hidden_size, self.seed)
        if self.embedding_weights is not None:
            table = np.asarray(self.embedding_weights, dtype=np.float32)
            if table.shape != arrays["emb"].shape:
                raise ValidationError([
                    f"embedding warm-start has shape {table.shape}, "
                    f"expected {arrays['emb'].shape}"])
            arrays["emb"] = table.copy()
        self.weights_ = {name: Tensor(a, requires_grad=True) for name, a in arrays.items()}

    def _lstm_weights(self) -> dict[str, Tensor]:
        return {name: t for name, t in self.weights_.items()
                if name.split(".")[0] in ("fwd", "bwd")}

    def _logits(self, batch: Batch) -> Tensor:
        x = embedding_lookup(self.weights_["emb"], batch.token_ids)
        hidden = bilstm_forward(x, self._lstm_weights(), batch.lengths())
        out = add(matmul(hidden, self.weights_["out.w"]), self.weights_["out.b"])
        return reshape(out, (batch.size,))

    def _windowed(self, sequences: list[TokenSequence]) -> list[TokenSequence]:
        return [window(s, self.context_window, FINETUNE_WINDOW) for s in sequences]

    def _mean_loss(self, sequences: list[TokenSequence], labels: np.ndarray) -> float:
        total = 0.0
        for lo in range(0, len(sequences), self.batch_size):
            chunk = sequences[lo:lo + self.batch_size]
            loss = binary_cross_entropy_with_logits(
                self._logits(Batch.from_sequences(chunk)), labels[lo:lo + self.batch_size])
            total += float(loss.data) * len(chunk)
        return total / len(sequences)

    # -- training ----------------------------------------------------------------

    def fit(self, sequences: list[TokenSequence], labels,
            val_sequences: list[TokenSequence], val_labels,
            vocab_size: int | None = None) -> "BiLstmClassifier":
        labels = np.asarray(labels, dtype=np.float64)
        val_labels = np.asarray(val_labels, dtype=np.float64)
        if len(sequences) != labels.shape[0] or len(val_sequences) != val_labels.shape[0]:
            raise ValidationError(["labels must align with sequences"])
        if not sequences or not val_sequences:
            raise ValidationError(["training needs non-empty train and validation sets"])
        if vocab_size is None:
            vocab_size = 1 + max(int(s.token_ids.max())
                                 for s in list(sequences) + list(val_sequences))
        self._build(vocab_size)

        train_seqs = self._windowed(sequences)
        val_seqs = self._windowed(val_sequences)
        rng = derive_rng(self.seed, "bilstm", "train")
        adam = AdamState.for_params(self.weights_)
        best_val = math.inf
        best = {name: t.data.copy() for name, t in self.weights_.items()}
        stale = 0
        self.loss_trace_ = []
        for epoch in range(self.epochs):
            order = rng.permutation(len(train_seqs))
            epoch_loss, seen = 0.0, 0
            for lo in range(0, len(order), self.batch_size):
                rows = order[lo:lo + self.batch_size]
                batch = Batch.from_sequences([train_seqs[i] for i in rows])
                loss = binary_cross_entropy_with_logits(self._logits(batch), labels[rows])
                if not math.isfinite(float(loss.data)):
                    raise TrainingError(f"epoch {epoch}: loss became non-finite")
                loss.backward()
                grads = {name: t.grad for name, t in self.weights_.items()
                         if t.grad is not None}
                adam_step(self.weights_, grads, adam, self.lr)
                zero_grads(self.weights_)
                epoch_loss += float(loss.data) * rows.size
                seen += rows.size
            val_loss = self._mean_loss(val_seqs, val_labels)
            self.loss_trace_.append({"epoch": epoch, "train_loss": epoch_loss / seen,
                                     "val_loss": val_loss})
            if val_loss < best_val:
                best_val = val_loss
                best = {name: t.data.copy() for name, t in self.weights_.items()}
                stale = 0
            else:
                stale += 1
                if stale > self.patience:
                    break
        for name, tensor in self.weights_.items():
            tensor.data[...] = best[name]
        self.best_val_loss_ = best_val
        return self

    # -- inference ----------------------------------------------------------------

    def _require_fitted(self) -> None:
        if not hasattr(self, "weights_"):
            raise ValidationError(["classifier is not fitted"])

    def decision_scores(self, sequences: list[TokenSequence]) -> np.ndarray:
        self._require_fitted()
        scores = []
        for lo in range(0, len(sequences), self.batch_size):
            chunk = self._windowed(sequences[lo:lo + self.batch_size])
            logits = self._logits(Batch.from_sequences(chunk)).data.astype(np.float64)
            scores.append(1.0 / (1.0 + np.exp(-logits)))
        return np.concatenate(scores)

    def predict_proba(self, sequences: list[TokenSequence]) -> np.ndarray:
        positive = self.decision_scores(sequences)
        return np.column_stack([1.0 - positive, positive])

    def predict(self, sequences: list[TokenSequence]) -> np.ndarray:
        return (self.decision_scores(sequences) >= 0.5).astype(np.int64)

    def save(self, path) -> None:
        self._require_fitted()
        save_weights(path, self.weights_)

    def load_fitted(self, path) -> "BiLstmClassifier":
        arrays = load_weights(path)
        self.weights_ = {name: Tensor(a, requires_grad=True)
                         for name, a in arrays.items()}
        return self
