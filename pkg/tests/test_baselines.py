"""Frequency-count logistic regression and the recurrent baseline classifier."""

import numpy as np
import pytest

from chronobert.baselines import BiLstmClassifier, LogisticFrequencyModel
from chronobert.errors import ValidationError
from chronobert.eval import roc_auc
from chronobert.sequence import FIRST_CONCEPT_ID, TokenSequence

KEY_TOKEN = FIRST_CONCEPT_ID + 5
VOCAB_SIZE = FIRST_CONCEPT_ID + 20


def count_matrix(seed, n=60, d=5):
    """Counts with column 0 carrying the label, the rest noise."""
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, size=n)
    x = rng.poisson(2.0, size=(n, d)).astype(float)
    x[:, 0] = y * 3 + rng.poisson(1.0, size=n)
    return x, y.astype(float)


def presence_sequences(n, seed, p_key=0.5):
    """Variable-length sequences labeled by whether KEY_TOKEN appears."""
    rng = np.random.default_rng(seed)
    sequences, labels = [], []
    for i in range(n):
        length = int(rng.integers(4, 25))
        tokens = rng.integers(FIRST_CONCEPT_ID, FIRST_CONCEPT_ID + 20, size=length)
        tokens[tokens == KEY_TOKEN] = KEY_TOKEN + 1
        has_key = rng.random() < p_key
        if has_key:
            tokens[rng.integers(0, length)] = KEY_TOKEN
        sequences.append(TokenSequence(
            token_ids=tokens.astype(np.int64),
            time_years=np.zeros(length),
            age_years=np.linspace(40.0, 41.0, length),
            visit_segment=np.ones(length, dtype=np.int64),
            visit_type_ids=np.ones(length, dtype=np.int64),
            attention_mask=np.ones(length, dtype=np.int64),
            person_id=f"p{i}"))
        labels.append(int(has_key))
    return sequences, np.array(labels, dtype=float)


def tiny_bilstm(seed=0, **overrides):
    params = dict(embedding_dim=16, hidden_size=8, context_window=24,
                  epochs=6, batch_size=16, lr=1e-2, patience=2, seed=seed)
    params.update(overrides)
    return BiLstmClassifier(**params)


class TestLogisticFrequencyModel:
    def test_separable_data_scores_high(self):
        x, y = count_matrix(seed=0)
        model = LogisticFrequencyModel().fit(x, y)
        assert roc_auc(model.decision_scores(x), y) >= 0.99

    def test_featureless_input_predicts_the_base_rate(self):
        """With all-zero features only the intercept can move."""
        y = np.array([1.0] * 9 + [0.0] * 21)
        model = LogisticFrequencyModel(max_iter=5000).fit(np.zeros((30, 4)), y)
        assert model.decision_scores(np.zeros((4, 4))) == pytest.approx(0.3, abs=1e-4)
        assert not model.coef_.any()

    def test_gradient_vanishes_at_the_reported_optimum(self):
        """Independently recomputed gradient confirms convergence."""
        x, y = count_matrix(seed=1, n=40)
        model = LogisticFrequencyModel(tol=1e-6, max_iter=20000).fit(x, y)
        assert model.converged_
        p = 1.0 / (1.0 + np.exp(-(x @ model.coef_ + model.intercept_)))
        grad_w = x.T @ (p - y) + model.l2 * model.coef_
        grad_b = float((p - y).sum())
        assert np.sqrt(grad_w @ grad_w + grad_b**2) <= 1e-6

    def test_default_step_decreases_the_objective_every_iteration(self):
        """The Lipschitz-bound step makes descent monotone."""
        x, y = count_matrix(seed=2)
        model = LogisticFrequencyModel(max_iter=50, tol=0.0).fit(x, y)
        trace = np.array(model.loss_trace_)
        assert (np.diff(trace) < 0).all()

    def test_stronger_ridge_shrinks_coefficients(self):
        x, y = count_matrix(seed=3)
        loose = LogisticFrequencyModel(l2=0.01).fit(x, y)
        tight = LogisticFrequencyModel(l2=100.0).fit(x, y)
        assert np.linalg.norm(tight.coef_) < np.linalg.norm(loose.coef_)

    def test_probabilities_sum_to_one(self):
        x, y = count_matrix(seed=4)
        proba = LogisticFrequencyModel().fit(x, y).predict_proba(x)
        assert proba.sum(axis=1) == pytest.approx(np.ones(len(x)))
        assert (proba >= 0).all()

    def test_single_class_rejected(self):
        with pytest.raises(ValidationError):
            LogisticFrequencyModel().fit(np.ones((10, 2)), np.ones(10))

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValidationError):
            LogisticFrequencyModel().fit(np.ones((10, 2)), np.zeros(9))

    def test_negative_ridge_rejected(self):
        x, y = count_matrix(seed=5)
        with pytest.raises(ValidationError):
            LogisticFrequencyModel(l2=-1.0).fit(x, y)

    def test_unfitted_scoring_rejected(self):
        with pytest.raises(ValidationError):
            LogisticFrequencyModel().decision_scores(np.ones((2, 2)))

    def test_save_load_roundtrip(self, tmp_path):
        x, y = count_matrix(seed=6)
        model = LogisticFrequencyModel().fit(x, y)
        model.save(tmp_path / "lr.cehrw")
        clone = LogisticFrequencyModel().load_fitted(tmp_path / "lr.cehrw")
        assert clone.decision_scores(x) == pytest.approx(model.decision_scores(x))


class TestBiLstmClassifier:
    def test_learns_a_planted_presence_signal(self):
        """A single indicative token is enough to reach high AUC."""
        for seed in (0, 1, 2):
            train, y_train = presence_sequences(96, seed=seed)
            val, y_val = presence_sequences(32, seed=100 + seed)
            test, y_test = presence_sequences(64, seed=200 + seed)
            model = tiny_bilstm(seed=seed, epochs=15).fit(train, y_train, val, y_val,
                                                          vocab_size=VOCAB_SIZE)
            assert roc_auc(model.decision_scores(test), y_test) >= 0.9

    def test_scores_are_probabilities(self):
        train, y_train = presence_sequences(32, seed=7)
        val, y_val = presence_sequences(16, seed=8)
        model = tiny_bilstm(epochs=1).fit(train, y_train, val, y_val)
        scores = model.decision_scores(train)
        assert ((scores > 0.0) & (scores < 1.0)).all()

    def test_same_seed_reproduces_scores(self):
        train, y_train = presence_sequences(32, seed=9)
        val, y_val = presence_sequences(16, seed=10)
        first = tiny_bilstm(epochs=2).fit(train, y_train, val, y_val)
        second = tiny_bilstm(epochs=2).fit(train, y_train, val, y_val)
        assert first.decision_scores(val) == pytest.approx(second.decision_scores(val))

    def test_early_stopping_restores_the_best_epoch(self):
        train, y_train = presence_sequences(48, seed=11)
        val, y_val = presence_sequences(24, seed=12)
        model = tiny_bilstm(epochs=6, patience=0).fit(train, y_train, val, y_val)
        val_losses = [entry["val_loss"] for entry in model.loss_trace_]
        assert model.best_val_loss_ == pytest.approx(min(val_losses))

    def test_embedding_warm_start_shape_checked(self):
        train, y_train = presence_sequences(16, seed=13)
        bad = np.zeros((3, 16), dtype=np.float32)
        model = tiny_bilstm(embedding_weights=bad)
        with pytest.raises(ValidationError):
            model.fit(train, y_train, train, y_train, vocab_size=VOCAB_SIZE)

    def test_embedding_warm_start_accepted(self):
        train, y_train = presence_sequences(16, seed=14)
        table = np.random.default_rng(0).normal(size=(VOCAB_SIZE, 16)).astype(np.float32)
        model = tiny_bilstm(epochs=1, embedding_weights=table)
        model.fit(train, y_train, train, y_train, vocab_size=VOCAB_SIZE)
        assert model.weights_["emb"].data.shape == (VOCAB_SIZE, 16)

    def test_empty_training_set_rejected(self):
        val, y_val = presence_sequences(8, seed=15)
        with pytest.raises(ValidationError):
            tiny_bilstm().fit([], np.array([]), val, y_val)

    def test_label_misalignment_rejected(self):
        train, y_train = presence_sequences(8, seed=16)
        with pytest.raises(ValidationError):
            tiny_bilstm().fit(train, y_train[:-1], train, y_train)

    def test_unfitted_scoring_rejected(self):
        seqs, _ = presence_sequences(2, seed=17)
        with pytest.raises(ValidationError):
            tiny_bilstm().decision_scores(seqs)

    def test_save_load_roundtrip(self, tmp_path):
        train, y_train = presence_sequences(24, seed=18)
        val, y_val = presence_sequences(12, seed=19)
        model = tiny_bilstm(epochs=2).fit(train, y_train, val, y_val)
        model.save(tmp_path / "lstm.cehrw")
        clone = tiny_bilstm().load_fitted(tmp_path / "lstm.cehrw")
        assert clone.decision_scores(val) == pytest.approx(model.decision_scores(val))
