"""Batching and the training objectives, ending in a full-model gradient check."""

import numpy as np
import pytest

from chronobert.errors import ValidationError
from chronobert.model import (
    Batch,
    ModelWeights,
    build_weights,
    encoder_forward,
    finetune_logits,
    finetune_loss,
    mlm_logits,
    predict_batch,
    pretrain_loss,
    temporal_concept_embedding,
)
from chronobert.rng import derive_rng
from chronobert.sequence import TokenSequence
from chronobert.tensor import Tensor
from gradcheck import check_gradients

from test_model_config import tiny_config


def padded_sequence(n_real: int, window: int, person_id: str = "p",
                    vocab_size: int = 30, n_types: int = 5, seed: int = 0) -> TokenSequence:
    rng = derive_rng(seed, "seq", person_id)
    ids = np.zeros(window, dtype=np.int64)
    ids[:n_real] = rng.integers(6, vocab_size, size=n_real)
    times = np.zeros(window)
    times[:n_real] = np.sort(rng.uniform(0, 5, size=n_real))
    mask = np.zeros(window, dtype=bool)
    mask[:n_real] = True
    segments = np.zeros(window, dtype=np.int64)
    segments[:n_real] = 1 + (np.arange(n_real) // 3) % 2
    type_ids = np.zeros(window, dtype=np.int64)
    type_ids[:n_real] = rng.integers(2, n_types, size=n_real)
    return TokenSequence(token_ids=ids, time_years=times, age_years=times + 40.0,
                         visit_segment=segments, visit_type_ids=type_ids,
                         attention_mask=mask, person_id=person_id)


def small_batch(config, n_real=(5, 9), window=16) -> Batch:
    return Batch.from_sequences([
        padded_sequence(n, window, person_id=f"p{i}", vocab_size=config.vocab_size,
                        n_types=config.n_visit_types, seed=i)
        for i, n in enumerate(n_real)])


class TestBatch:
    """Stacking and shared-padding trimming."""

    def test_trims_to_multiple_of_eight(self):
        batch = small_batch(tiny_config(), n_real=(5, 9), window=32)
        assert batch.length == 16
        assert batch.size == 2
        assert batch.lengths().tolist() == [5, 9]

    def test_never_exceeds_window(self):
        batch = small_batch(tiny_config(), n_real=(5, 5), window=6)
        assert batch.length == 6

    def test_keeps_channel_content(self):
        seq = padded_sequence(5, 32)
        batch = Batch.from_sequences([seq])
        assert np.array_equal(batch.token_ids[0], seq.token_ids[:8])
        assert np.array_equal(batch.attention_mask[0], seq.attention_mask[:8])
        assert batch.person_ids == ["p"]

    def test_rejects_mixed_window_lengths(self):
        with pytest.raises(ValidationError):
            Batch.from_sequences([padded_sequence(4, 16), padded_sequence(4, 24)])

    def test_rejects_empty(self):
        with pytest.raises(ValidationError):
            Batch.from_sequences([])


class TestMlmLogits:
    def test_projection_is_tied_to_embedding_table(self):
        config = tiny_config()
        weights = ModelWeights.initialize(config)
        rng = derive_rng(3, "tied")
        encoded = Tensor(rng.normal(size=(2, 4, config.d_model)).astype(np.float32))
        logits = mlm_logits(encoded, weights)
        expected = encoded.data @ weights["concept_emb"].data.T + weights["mlm_bias"].data
        assert logits.shape == (2, 4, config.vocab_size)
        assert np.allclose(logits.data, expected, atol=1e-6)

    def test_embedding_table_receives_both_gradient_paths(self):
        config = tiny_config()
        weights = ModelWeights.initialize(config)
        batch = small_batch(config)
        loss, _ = pretrain_loss(batch, weights, config, derive_rng(0, "g"), training=False)
        loss.backward()
        grad = weights["concept_emb"].grad
        assert grad is not None and np.abs(grad).sum() > 0


class TestPretrainLoss:
    """Composition of the masked-token and visit-type objectives."""

    def test_reports_all_components(self):
        config = tiny_config()
        weights = ModelWeights.initialize(config)
        loss, parts = pretrain_loss(small_batch(config), weights, config,
                                    derive_rng(1, "pl"), training=False)
        assert set(parts) == {"mlm_loss", "vtp_loss", "total_loss"}
        assert parts["total_loss"] == pytest.approx(
            parts["mlm_loss"] + config.vtp_loss_weight * parts["vtp_loss"], rel=1e-6)
        assert float(loss.data) == pytest.approx(parts["total_loss"], rel=1e-6)

    def test_disabled_second_objective_is_pure_mlm(self):
        config = tiny_config(vtp_enabled=False)
        weights = ModelWeights.initialize(config)
        loss, parts = pretrain_loss(small_batch(config), weights, config,
                                    derive_rng(1, "pl"), training=False)
        assert parts["vtp_loss"] == 0.0
        assert float(loss.data) == parts["mlm_loss"] == parts["total_loss"]

    def test_zero_weight_keeps_total_equal_to_mlm(self):
        config = tiny_config(vtp_loss_weight=0.0)
        weights = ModelWeights.initialize(config)
        loss, parts = pretrain_loss(small_batch(config), weights, config,
                                    derive_rng(1, "pl"), training=False)
        assert float(loss.data) == parts["mlm_loss"]
        assert parts["vtp_loss"] > 0.0

    def test_initial_loss_near_uniform_guess(self):
        config = tiny_config()
        weights = ModelWeights.initialize(config)
        _, parts = pretrain_loss(small_batch(config), weights, config,
                                 derive_rng(2, "pl"), training=False)
        assert abs(parts["mlm_loss"] - np.log(config.vocab_size)) < 0.5
        assert abs(parts["vtp_loss"] - np.log(config.n_visit_types)) < 0.5

    def test_same_rng_reproduces_loss(self):
        config = tiny_config()
        weights = ModelWeights.initialize(config)
        batch = small_batch(config)
        a = pretrain_loss(batch, weights, config, derive_rng(7, "x"), training=False)[1]
        b = pretrain_loss(batch, weights, config, derive_rng(7, "x"), training=False)[1]
        assert a == b

    def test_concepts_only_masking_flag(self):
        config = tiny_config()
        weights = ModelWeights.initialize(config)
        batch = small_batch(config)
        loss, _ = pretrain_loss(batch, weights, config, derive_rng(0, "m"),
                                training=False, mask_artificial=False)
        assert np.isfinite(float(loss.data))


class TestFinetunePath:
    def test_logit_shape(self):
        config = tiny_config()
        weights = ModelWeights.initialize(config)
        batch = small_batch(config)
        assert finetune_logits(batch, weights, config).shape == (2,)

    def test_zeroed_head_predicts_one_half(self):
        config = tiny_config()
        weights = ModelWeights.initialize(config)
        weights["clf.out.w"].data[:] = 0.0
        weights["clf.out.b"].data[:] = 0.0
        probs = predict_batch(small_batch(config), weights, config)
        assert np.array_equal(probs, np.full(2, 0.5))

    def test_predictions_are_sigmoid_of_logits(self):
        config = tiny_config()
        weights = ModelWeights.initialize(config)
        batch = small_batch(config)
        logits = finetune_logits(batch, weights, config).data.astype(np.float64)
        assert np.allclose(predict_batch(batch, weights, config),
                           1 / (1 + np.exp(-logits)), atol=1e-12)

    def test_loss_decreases_along_gradient_step(self):
        config = tiny_config()
        weights = ModelWeights.initialize(config)
        batch = small_batch(config)
        labels = np.array([1.0, 0.0])
        loss = finetune_loss(batch, labels, weights, config, rng=None, training=False)
        loss.backward()
        before = float(loss.data)
        for t in weights.tensors.values():
            if t.grad is not None:
                t.data = t.data - 0.05 * t.grad.astype(t.data.dtype)
        after = float(finetune_loss(batch, labels, weights, config,
                                    rng=None, training=False).data)
        assert after < before


class TestFullModelGradients:
    """Finite differences through the entire network in float64."""

    def setup_method(self):
        self.config = tiny_config(vocab_size=26, n_visit_types=4, n_layers=1,
                                  d_model=8, n_heads=2, d_ff=12, time2vec_dim=2,
                                  context_window=8)
        arrays = build_weights(self.config, dtype=np.float64)
        self.weights = ModelWeights(self.config, arrays)
        self.batch = small_batch(self.config, n_real=(4, 7), window=8)

    def probed(self, names):
        return {name: self.weights[name] for name in names}

    def test_pretraining_objective(self):
        rng = derive_rng(0, "fd-pre")

        def build():
            loss, _ = pretrain_loss(self.batch, self.weights, self.config,
                                    derive_rng(5, "mask-fd"), training=False)
            return loss

        names = ["concept_emb", "segment_emb", "mlm_bias", "emb.fusion.w",
                 "emb.t2v_time.omega", "emb.t2v_age.phi", "enc0.attn.wq",
                 "enc0.attn.bo", "enc0.ln1.g", "enc0.ff.w1", "type_emb",
                 "vtp.cross.wk", "vtp.ln_ff.b", "vtp.out.w"]
        check_gradients(build, self.probed(names), rng, tol=2e-4, max_coords=4, floor=1e-6)

    def test_finetuning_objective(self):
        rng = derive_rng(1, "fd-fine")
        labels = np.array([1.0, 0.0])

        def build():
            return finetune_loss(self.batch, labels, self.weights, self.config,
                                 rng=None, training=False)

        names = ["concept_emb", "emb.fusion.b", "enc0.attn.wv", "enc0.ln2.b",
                 "clf.fwd.wx", "clf.fwd.wh", "clf.bwd.b", "clf.out.w", "clf.out.b"]
        check_gradients(build, self.probed(names), rng, tol=2e-4, max_coords=4, floor=1e-6)
