"""Weight construction, naming, and checkpoint round-tripping.

Tensor names are the serialization contract: ``enc{i}.attn.wq``,
``t2v_time.omega``, ``clf.fwd.wx`` and so on. All matrices are truncated
normal (sigma 0.02, clipped at two sigma); time2vec frequencies are standard
normal with uniform phases; norms start at identity; biases at zero.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from ..rng import derive_rng
from ..tensor import Tensor, load_weights, save_weights
from .config import CLASSIFIER_HIDDEN, ModelConfig

INIT_SIGMA = 0.02


def _trunc_normal(rng, shape, dtype, sigma=INIT_SIGMA):
    return np.clip(rng.normal(0.0, sigma, size=shape), -2 * sigma, 2 * sigma).astype(dtype)


def _zeros(shape, dtype):
    return np.zeros(shape, dtype=dtype)


def _ones(shape, dtype):
    return np.ones(shape, dtype=dtype)


def _time2vec_params(rng, k, dtype, out, prefix):
    out[f"{prefix}.omega"] = rng.normal(0.0, 1.0, size=k).astype(dtype)
    out[f"{prefix}.phi"] = rng.uniform(-np.pi, np.pi, size=k).astype(dtype)


def _attention_params(rng, d_model, dtype, out, prefix):
    for name in ("wq", "wk", "wv", "wo"):
        out[f"{prefix}.{name}"] = _trunc_normal(rng, (d_model, d_model), dtype)
    for name in ("bq", "bk", "bv", "bo"):
        out[f"{prefix}.{name}"] = _zeros(d_model, dtype)


def _ffn_params(rng, d_model, d_ff, dtype, out, prefix):
    out[f"{prefix}.w1"] = _trunc_normal(rng, (d_model, d_ff), dtype)
    out[f"{prefix}.b1"] = _zeros(d_ff, dtype)
    out[f"{prefix}.w2"] = _trunc_normal(rng, (d_ff, d_model), dtype)
    out[f"{prefix}.b2"] = _zeros(d_model, dtype)


def _norm_params(d_model, dtype, out, prefix):
    out[f"{prefix}.g"] = _ones(d_model, dtype)
    out[f"{prefix}.b"] = _zeros(d_model, dtype)


def _fusion_params(rng, config, dtype, out, prefix):
    """Temporal fusion weights for one pathway, per embedding mode."""
    d, k = config.d_model, config.time2vec_dim
    if config.embedding_mode == "concat_fc":
        _time2vec_params(rng, k, dtype, out, f"{prefix}.t2v_time")
        _time2vec_params(rng, k, dtype, out, f"{prefix}.t2v_age")
        out[f"{prefix}.fusion.w"] = _trunc_normal(rng, (d + 2 * k, d), dtype)
        out[f"{prefix}.fusion.b"] = _zeros(d, dtype)
    elif config.embedding_mode == "sum":
        _time2vec_params(rng, k, dtype, out, f"{prefix}.t2v_time")
        _time2vec_params(rng, k, dtype, out, f"{prefix}.t2v_age")
        out[f"{prefix}.proj_time.w"] = _trunc_normal(rng, (k, d), dtype)
        out[f"{prefix}.proj_age.w"] = _trunc_normal(rng, (k, d), dtype)
    # none_positional: no learned temporal parameters


def build_weights(config: ModelConfig, dtype=np.float32) -> dict[str, np.ndarray]:
    """Fresh parameter arrays for the configured architecture."""
    config.validate()
    rng = derive_rng(config.seed, "init")
    d = config.d_model
    out: dict[str, np.ndarray] = {}

    out["concept_emb"] = _trunc_normal(rng, (config.vocab_size, d), dtype)
    out["segment_emb"] = _trunc_normal(rng, (3, d), dtype)
    out["mlm_bias"] = _zeros(config.vocab_size, dtype)
    _fusion_params(rng, config, dtype, out, "emb")

    for i in range(config.n_layers):
        _attention_params(rng, d, dtype, out, f"enc{i}.attn")
        _norm_params(d, dtype, out, f"enc{i}.ln1")
        _ffn_params(rng, d, config.d_ff, dtype, out, f"enc{i}.ff")
        _norm_params(d, dtype, out, f"enc{i}.ln2")

    if config.vtp_enabled:
        out["type_emb"] = _trunc_normal(rng, (config.n_visit_types, d), dtype)
        _fusion_params(rng, config, dtype, out, "vtp")
        if config.vtp_self_attention:
            _attention_params(rng, d, dtype, out, "vtp.self")
            _norm_params(d, dtype, out, "vtp.ln_self")
        _attention_params(rng, d, dtype, out, "vtp.cross")
        _norm_params(d, dtype, out, "vtp.ln_cross")
        _ffn_params(rng, d, config.d_ff, dtype, out, "vtp.ff")
        _norm_params(d, dtype, out, "vtp.ln_ff")
        out["vtp.out.w"] = _trunc_normal(rng, (d, config.n_visit_types), dtype)
        out["vtp.out.b"] = _zeros(config.n_visit_types, dtype)

    h = CLASSIFIER_HIDDEN
    for side in ("fwd", "bwd"):
        out[f"clf.{side}.wx"] = _trunc_normal(rng, (d, 4 * h), dtype)
        out[f"clf.{side}.wh"] = _trunc_normal(rng, (h, 4 * h), dtype)
        out[f"clf.{side}.b"] = _zeros(4 * h, dtype)
    out["clf.out.w"] = _trunc_normal(rng, (2 * h, 1), dtype)
    out["clf.out.b"] = _zeros(1, dtype)
    return out


class ModelWeights:
    """A named bundle of trainable tensors tied to its ModelConfig."""

    def __init__(self, config: ModelConfig, arrays: dict[str, np.ndarray]):
        self.config = config
        self.tensors: dict[str, Tensor] = {
            name: Tensor(arr, requires_grad=True) for name, arr in arrays.items()
        }

    @classmethod
    def initialize(cls, config: ModelConfig, dtype=np.float32) -> "ModelWeights":
        return cls(config, build_weights(config, dtype))

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self.tensors

    def names(self) -> list[str]:
        return list(self.tensors)

    def subset(self, prefix: str) -> dict[str, Tensor]:
        """Tensors under a dotted prefix, keyed by the remainder of the name."""
        skip = len(prefix) + 1
        return {name[skip:]: t for name, t in self.tensors.items() if name.startswith(prefix + ".")}

    def param_count(self) -> int:
        return sum(t.data.size for t in self.tensors.values())

    def group_counts(self) -> dict[str, int]:
        """Parameter counts keyed by top-level name component."""
        groups: dict[str, int] = {}
        for name, t in self.tensors.items():
            group = name.split(".")[0]
            groups[group] = groups.get(group, 0) + t.data.size
        return groups

    def snapshot(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self.tensors.items()}

    def restore(self, arrays: dict[str, np.ndarray]) -> None:
        if set(arrays) != set(self.tensors):
            raise ConfigError(["weight snapshot does not match the current parameter set"])
        for name, arr in arrays.items():
            if arr.shape != self.tensors[name].data.shape:
                raise ConfigError([f"snapshot shape mismatch for {name!r}"])
            self.tensors[name].data = arr.astype(self.tensors[name].data.dtype, copy=True)

    def save(self, path) -> None:
        save_weights(path, self.tensors)

    @classmethod
    def load(cls, path, config: ModelConfig) -> "ModelWeights":
        arrays = load_weights(path)
        expected = build_weights(config)
        missing = sorted(set(expected) - set(arrays))
        extra = sorted(set(arrays) - set(expected))
        problems = [f"checkpoint missing tensor {n!r}" for n in missing]
        problems += [f"checkpoint has unexpected tensor {n!r}" for n in extra]
        for name in set(expected) & set(arrays):
            if expected[name].shape != arrays[name].shape:
                problems.append(
                    f"checkpoint tensor {name!r} has shape {arrays[name].shape}, "
                    f"config implies {expected[name].shape}")
        if problems:
            raise ConfigError(problems)
        return cls(config, arrays)
