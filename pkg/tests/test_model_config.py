"""Model configuration and parameter-bundle behavior."""

import numpy as np
import pytest

from chronobert.errors import ConfigError
from chronobert.model import INIT_SIGMA, ModelConfig, ModelWeights, build_weights


def tiny_config(**overrides) -> ModelConfig:
    base = dict(vocab_size=30, n_visit_types=5, n_layers=2, n_heads=2, d_model=8,
                d_ff=16, dropout=0.0, time2vec_dim=3, context_window=16, seed=11)
    base.update(overrides)
    return ModelConfig(**base)


class TestModelConfig:
    """Validation and dict round-tripping of the hyperparameter record."""

    def test_defaults_validate(self):
        config = ModelConfig(vocab_size=100, n_visit_types=9)
        config.validate()
        assert config.head_dim == 16

    def test_rejects_indivisible_heads(self):
        with pytest.raises(ConfigError, match="not divisible"):
            tiny_config(d_model=10, n_heads=4).validate()

    def test_rejects_small_vocab(self):
        with pytest.raises(ConfigError, match="reserved block"):
            tiny_config(vocab_size=22).validate()

    def test_rejects_bad_dropout(self):
        with pytest.raises(ConfigError, match="dropout"):
            tiny_config(dropout=1.0).validate()

    def test_rejects_degenerate_time2vec(self):
        with pytest.raises(ConfigError, match="time2vec"):
            tiny_config(time2vec_dim=1).validate()

    def test_positional_mode_allows_no_time2vec(self):
        tiny_config(time2vec_dim=0, embedding_mode="none_positional").validate()

    def test_rejects_odd_width_for_positional(self):
        with pytest.raises(ConfigError, match="even"):
            tiny_config(d_model=9, n_heads=3, embedding_mode="none_positional").validate()

    def test_rejects_negative_objective_weight(self):
        with pytest.raises(ConfigError, match="non-negative"):
            tiny_config(vtp_loss_weight=-0.5).validate()

    def test_collects_multiple_problems(self):
        with pytest.raises(ConfigError) as exc:
            tiny_config(vocab_size=1, n_layers=0, dropout=2.0).validate()
        assert len(exc.value.problems) == 3

    def test_dict_roundtrip(self):
        config = tiny_config(embedding_mode="sum")
        assert ModelConfig.from_dict(config.to_dict()) == config

    def test_from_dict_rejects_unknown_keys(self):
        with pytest.raises(ConfigError, match="n_headz"):
            ModelConfig.from_dict({"vocab_size": 30, "n_visit_types": 5, "n_headz": 4})

    def test_from_dict_requires_data_dims(self):
        with pytest.raises(ConfigError, match="vocab_size"):
            ModelConfig.from_dict({"n_visit_types": 5})

    def test_with_data_dims_replaces_only_dims(self):
        config = tiny_config().with_data_dims(99, 7)
        assert (config.vocab_size, config.n_visit_types) == (99, 7)
        assert config.d_model == 8


class TestBuildWeights:
    """Shape layout and initialization statistics of the parameter dict."""

    def test_core_shapes(self):
        config = tiny_config()
        arrays = build_weights(config)
        assert arrays["concept_emb"].shape == (30, 8)
        assert arrays["segment_emb"].shape == (3, 8)
        assert arrays["mlm_bias"].shape == (30,)
        assert arrays["emb.fusion.w"].shape == (8 + 2 * 3, 8)
        assert arrays["enc0.attn.wq"].shape == (8, 8)
        assert arrays["enc1.ff.w1"].shape == (8, 16)
        assert arrays["enc1.ln2.g"].shape == (8,)
        assert arrays["clf.fwd.wx"].shape == (8, 256)
        assert arrays["clf.fwd.wh"].shape == (64, 256)
        assert arrays["clf.out.w"].shape == (128, 1)
        assert all(a.dtype == np.float32 for a in arrays.values())

    def test_visit_objective_parameters_present_when_enabled(self):
        arrays = build_weights(tiny_config())
        assert arrays["type_emb"].shape == (5, 8)
        assert arrays["vtp.out.w"].shape == (8, 5)
        assert "vtp.self.wq" in arrays and "vtp.cross.wq" in arrays

    def test_visit_objective_parameters_absent_when_disabled(self):
        arrays = build_weights(tiny_config(vtp_enabled=False))
        assert not any(name.startswith("vtp.") or name == "type_emb" for name in arrays)

    def test_self_attention_block_is_optional(self):
        arrays = build_weights(tiny_config(vtp_self_attention=False))
        assert "vtp.cross.wq" in arrays
        assert not any(name.startswith("vtp.self") or name.startswith("vtp.ln_self")
                       for name in arrays)

    def test_fusion_parameters_follow_embedding_mode(self):
        concat = build_weights(tiny_config())
        summed = build_weights(tiny_config(embedding_mode="sum"))
        positional = build_weights(tiny_config(embedding_mode="none_positional", time2vec_dim=0))
        assert "emb.fusion.w" in concat and "emb.proj_time.w" not in concat
        assert "emb.proj_time.w" in summed and "emb.fusion.w" not in summed
        assert summed["emb.proj_time.w"].shape == (3, 8)
        assert not any(name.startswith("emb.") for name in positional)

    def test_initialization_statistics(self):
        arrays = build_weights(tiny_config(vocab_size=4000, d_model=64, n_heads=4))
        emb = arrays["concept_emb"]
        assert abs(emb.std() - INIT_SIGMA) < 0.002
        assert np.abs(emb).max() <= 2 * INIT_SIGMA + 1e-6
        assert np.all(arrays["enc0.ln1.g"] == 1.0)
        assert np.all(arrays["enc0.attn.bq"] == 0.0)
        phi = arrays["emb.t2v_time.phi"]
        assert np.all((phi >= -np.pi) & (phi <= np.pi))

    def test_seed_controls_initialization(self):
        a = build_weights(tiny_config(seed=1))
        b = build_weights(tiny_config(seed=1))
        c = build_weights(tiny_config(seed=2))
        assert np.array_equal(a["concept_emb"], b["concept_emb"])
        assert not np.array_equal(a["concept_emb"], c["concept_emb"])


class TestModelWeights:
    def test_subset_strips_prefix(self):
        weights = ModelWeights.initialize(tiny_config())
        attn = weights.subset("enc0.attn")
        assert set(attn) == {"wq", "wk", "wv", "wo", "bq", "bk", "bv", "bo"}

    def test_param_count_matches_group_sum(self):
        weights = ModelWeights.initialize(tiny_config())
        assert weights.param_count() == sum(weights.group_counts().values())

    def test_snapshot_restore_roundtrip(self):
        weights = ModelWeights.initialize(tiny_config())
        saved = weights.snapshot()
        weights["concept_emb"].data[:] = 0.0
        weights.restore(saved)
        assert np.array_equal(weights["concept_emb"].data, saved["concept_emb"])

    def test_restore_rejects_mismatched_names(self):
        weights = ModelWeights.initialize(tiny_config())
        saved = weights.snapshot()
        saved.pop("mlm_bias")
        with pytest.raises(ConfigError):
            weights.restore(saved)

    def test_file_roundtrip(self, tmp_path):
        config = tiny_config()
        weights = ModelWeights.initialize(config)
        path = tmp_path / "model.cehrw"
        weights.save(path)
        loaded = ModelWeights.load(path, config)
        assert loaded.names() == weights.names()
        for name in weights.names():
            assert np.array_equal(loaded[name].data, weights[name].data)

    def test_load_rejects_wrong_architecture(self, tmp_path):
        path = tmp_path / "model.cehrw"
        ModelWeights.initialize(tiny_config()).save(path)
        with pytest.raises(ConfigError, match="shape|missing|unexpected"):
            ModelWeights.load(path, tiny_config(d_model=16, n_heads=2))
