"""Pretraining and fine-tuning loops on small synthetic corpora."""

import numpy as np
import pytest

from chronobert.data import SynthConfig, generate_synthetic
from chronobert.errors import ValidationError
from chronobert.model import (
    Batch,
    ModelWeights,
    OutcomeClassifier,
    SequencePretrainer,
    eligible_person_ids,
    pretrain_loss,
)
from chronobert.rng import derive_rng
from chronobert.sequence import (
    PRETRAIN_WINDOW,
    RepresentationVariant,
    build_sequence,
    window,
)


def tiny_pretrainer(**overrides) -> SequencePretrainer:
    base = dict(n_layers=1, n_heads=2, d_model=16, d_ff=32, time2vec_dim=4,
                context_window=64, epochs=2, batch_size=8, seed=9)
    base.update(overrides)
    return SequencePretrainer(**base)


@pytest.fixture(scope="module")
def store():
    return generate_synthetic(SynthConfig(n_patients=30, mean_visits=5.0), seed=21)


@pytest.fixture(scope="module")
def fitted(store):
    return tiny_pretrainer().fit(store)


class TestEligibility:
    """The minimum-history filter for pretraining."""

    def test_threshold_counts_total_events(self, store):
        expected = [pid for pid in store.person_ids
                    if len(store.events_of_person(pid)) >= 10]
        assert eligible_person_ids(store, min_events=10) == expected

    def test_default_drops_sparse_patients(self):
        sparse = generate_synthetic(
            SynthConfig(n_patients=40, mean_visits=1.2, mean_events_per_visit=1.5), seed=3)
        kept = eligible_person_ids(sparse)
        assert 0 < len(kept) < 40


class TestSequencePretrainer:
    def test_prepare_builds_vocabulary_from_store(self, store, fitted):
        assert fitted.vocab_.encode_concept("c_1") >= 22
        assert fitted.config_.vocab_size == len(fitted.vocab_)
        assert fitted.config_.n_visit_types == len(fitted.type_vocab_)

    def test_trace_covers_every_step(self, store, fitted):
        n_people = len(fitted.person_ids_)
        batches_per_epoch = -(-n_people // fitted.batch_size)
        assert len(fitted.loss_trace_) == 2 * batches_per_epoch
        assert fitted.loss_trace_[0]["lr"] == pytest.approx(fitted.initial_lr)
        assert {"step", "epoch", "lr", "mlm_loss", "vtp_loss", "total_loss"} <= \
            set(fitted.loss_trace_[0])

    def test_learning_rate_anneals(self, store, fitted):
        lrs = sorted({entry["lr"] for entry in fitted.loss_trace_}, reverse=True)
        assert len(lrs) == 2
        assert lrs[1] < lrs[0]

    def test_training_beats_random_initialization(self, store, fitted):
        probe_ids = fitted.person_ids_[:8]
        fresh = tiny_pretrainer().prepare(store)

        def probe_loss(pretrainer):
            seqs = [window(build_sequence(store, pid, RepresentationVariant.CEHR,
                                          pretrainer.vocab_, pretrainer.type_vocab_),
                           64, PRETRAIN_WINDOW, derive_rng(0, "probe-window", pid))
                    for pid in probe_ids]
            loss, _ = pretrain_loss(Batch.from_sequences(seqs), pretrainer.weights_,
                                    pretrainer.config_, derive_rng(0, "probe-mask"),
                                    training=False)
            return float(loss.data)

        assert probe_loss(fitted) < probe_loss(fresh)

    def test_prepare_is_deterministic(self, store):
        a = tiny_pretrainer().prepare(store)
        b = tiny_pretrainer().prepare(store)
        assert a.weights_.snapshot().keys() == b.weights_.snapshot().keys()
        assert all(np.array_equal(a.weights_[n].data, b.weights_[n].data)
                   for n in a.weights_.names())

    def test_fit_is_deterministic(self, store, fitted):
        again = tiny_pretrainer().fit(store)
        assert all(np.array_equal(again.weights_[n].data, fitted.weights_[n].data)
                   for n in fitted.weights_.names())
        assert again.loss_trace_ == fitted.loss_trace_

    def test_params_roundtrip_clones(self, store):
        pretrainer = tiny_pretrainer(embedding_mode="sum", vtp_enabled=False)
        clone = SequencePretrainer(**pretrainer.get_params())
        assert clone.get_params() == pretrainer.get_params()

    def test_set_params_rejects_unknown(self):
        with pytest.raises(ValueError, match="n_layerz"):
            tiny_pretrainer().set_params(n_layerz=3)

    def test_interval_embeddings_cover_all_gap_tokens(self, fitted):
        names, rows = fitted.interval_token_embeddings()
        assert names == ["W0", "W1", "W2", "W3",
                         "M1", "M2", "M3", "M4", "M5", "M6", "M7", "M8", "M9", "M10", "M11",
                         "LT"]
        assert rows.shape == (16, fitted.config_.d_model)

    def test_save_load_roundtrip(self, tmp_path, fitted):
        paths = (tmp_path / "w.cehrw", tmp_path / "vocab.csv", tmp_path / "types.csv")
        fitted.save(*paths)
        restored = tiny_pretrainer().load_fitted(*paths)
        assert restored.vocab_ == fitted.vocab_
        assert restored.config_ == fitted.config_
        assert np.array_equal(restored.weights_["concept_emb"].data,
                              fitted.weights_["concept_emb"].data)

    def test_unfitted_accessors_refuse(self):
        with pytest.raises(ValidationError, match="not fitted"):
            tiny_pretrainer().interval_token_embeddings()

    def test_rejects_store_with_no_eligible_patients(self):
        tiny = generate_synthetic(SynthConfig(n_patients=3, mean_visits=1.0,
                                              mean_events_per_visit=1.0), seed=0)
        with pytest.raises(ValidationError, match="at least"):
            tiny_pretrainer(min_events=1000).fit(tiny)


@pytest.fixture(scope="module")
def task(store, fitted):
    seqs = [build_sequence(store, pid, RepresentationVariant.CEHR,
                           fitted.vocab_, fitted.type_vocab_)
            for pid in fitted.person_ids_]
    labels = np.array([len(s) % 2 for s in seqs], dtype=np.float64)
    return seqs, labels


class TestOutcomeClassifier:
    def test_fit_predict_shapes(self, fitted, task):
        seqs, labels = task
        clf = OutcomeClassifier(fitted, epochs=2, batch_size=8, seed=1)
        clf.fit(seqs[:20], labels[:20], seqs[20:], labels[20:])
        proba = clf.predict_proba(seqs[20:])
        assert proba.shape == (len(seqs) - 20, 2)
        assert np.allclose(proba.sum(axis=1), 1.0)
        assert set(clf.predict(seqs[20:])) <= {0, 1}

    def test_early_stopping_restores_best_epoch(self, fitted, task):
        seqs, labels = task
        clf = OutcomeClassifier(fitted, epochs=8, batch_size=8, patience=1, seed=2)
        clf.fit(seqs[:20], labels[:20], seqs[20:], labels[20:])
        val_losses = [entry["val_loss"] for entry in clf.loss_trace_]
        assert clf.best_val_loss_ == min(val_losses)
        assert len(val_losses) <= 8

    def test_fit_leaves_pretrained_weights_untouched(self, store, fitted, task):
        seqs, labels = task
        before = fitted.weights_.snapshot()
        OutcomeClassifier(fitted, epochs=1, batch_size=8).fit(
            seqs[:20], labels[:20], seqs[20:], labels[20:])
        assert all(np.array_equal(before[n], fitted.weights_[n].data) for n in before)

    def test_label_alignment_checked(self, fitted, task):
        seqs, labels = task
        with pytest.raises(ValidationError, match="align"):
            OutcomeClassifier(fitted).fit(seqs[:5], labels[:4], seqs[5:8], labels[5:8])

    def test_learns_a_separable_signal(self, store, fitted):
        """A label perfectly determined by an observed concept becomes learnable."""
        seqs = [build_sequence(store, pid, RepresentationVariant.CEHR,
                               fitted.vocab_, fitted.type_vocab_)
                for pid in fitted.person_ids_]
        marker = fitted.vocab_.encode_concept("c_1")
        labels = np.array([float(marker in s.token_ids) for s in seqs])
        if labels.std() == 0:
            pytest.skip("degenerate labels in this corpus")
        clf = OutcomeClassifier(fitted, epochs=6, batch_size=8, lr=3e-4,
                                patience=5, seed=4)
        clf.fit(seqs, labels, seqs, labels)
        scores = clf.decision_scores(seqs)
        pos = scores[labels == 1].mean()
        neg = scores[labels == 0].mean()
        assert pos > neg
