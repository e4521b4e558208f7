"""Model building blocks: temporal embeddings, attention, encoder, type decoder.

All forwards take plain numpy channel arrays (ids, times, masks) plus the
ModelWeights bundle and return graph tensors. Dropout and masking randomness
comes from an explicitly passed generator; nothing reads global RNG state.
"""

from __future__ import annotations

import numpy as np

from ..tensor import (
    Tensor,
    concat,
    dropout,
    embedding_lookup,
    gelu,
    layer_norm,
    matmul,
    narrow,
    permute,
    reshape,
    sin,
    softmax_rows,
    transpose_last,
)
from .config import ModelConfig
from .weights import ModelWeights

LN_EPS = 1e-12
MASK_BIAS = -1e9


def time2vec(tau: Tensor, omega: Tensor, phi: Tensor) -> Tensor:
    """Learnable time features: out[..., 0] = w0*t + p0, out[..., i] = sin(wi*t + pi)."""
    k = omega.shape[0]
    if phi.shape != (k,):
        raise ValueError("omega and phi must have the same length")
    expanded = reshape(tau, tau.shape + (1,))
    arg = expanded * omega + phi
    if k == 1:
        return arg
    linear = narrow(arg, -1, 0, 1)
    periodic = sin(narrow(arg, -1, 1, k - 1))
    return concat([linear, periodic], axis=-1)


def sinusoidal_positions(length: int, d_model: int, dtype=np.float64) -> np.ndarray:
    """The fixed transformer position table (sin on even dims, cos on odd)."""
    positions = np.arange(length, dtype=np.float64)[:, None]
    dims = np.arange(0, d_model, 2, dtype=np.float64)[None, :]
    angles = positions / np.power(10000.0, dims / d_model)
    table = np.zeros((length, d_model), dtype=np.float64)
    table[:, 0::2] = np.sin(angles)
    table[:, 1::2] = np.cos(angles)
    return table.astype(dtype)


def _temporal_fusion(base: Tensor, time_years: np.ndarray, age_years: np.ndarray,
                     weights: ModelWeights, prefix: str, mode: str, dtype) -> Tensor:
    """Combine a base embedding with time/age per the configured mode."""
    if mode == "none_positional":
        length, d = base.shape[-2], base.shape[-1]
        return base + Tensor(sinusoidal_positions(length, d, dtype))
    t = Tensor(time_years.astype(dtype, copy=False))
    a = Tensor(age_years.astype(dtype, copy=False))
    t_feat = time2vec(t, weights[f"{prefix}.t2v_time.omega"], weights[f"{prefix}.t2v_time.phi"])
    a_feat = time2vec(a, weights[f"{prefix}.t2v_age.omega"], weights[f"{prefix}.t2v_age.phi"])
    if mode == "concat_fc":
        fused = concat([base, t_feat, a_feat], axis=-1)
        return matmul(fused, weights[f"{prefix}.fusion.w"]) + weights[f"{prefix}.fusion.b"]
    if mode == "sum":
        return base + matmul(t_feat, weights[f"{prefix}.proj_time.w"]) \
            + matmul(a_feat, weights[f"{prefix}.proj_age.w"])
    raise ValueError(f"unknown embedding mode {mode!r}")


def temporal_concept_embedding(token_ids: np.ndarray, time_years: np.ndarray,
                               age_years: np.ndarray, segments: np.ndarray,
                               weights: ModelWeights, config: ModelConfig) -> Tensor:
    """Input embeddings (B, L, d): concept + segment, fused with time and age.

    In concat_fc/sum modes the temporal channels are the only order signal;
    none_positional adds the sinusoidal table instead.
    """
    base = embedding_lookup(weights["concept_emb"], token_ids) \
        + embedding_lookup(weights["segment_emb"], segments)
    dtype = weights["concept_emb"].data.dtype
    return _temporal_fusion(base, time_years, age_years, weights, "emb",
                            config.embedding_mode, dtype)


def attention_bias(attention_mask: np.ndarray, dtype) -> Tensor:
    """(B, 1, 1, L) additive bias: 0 on real keys, a large negative on pads."""
    bias = np.where(attention_mask[:, None, None, :], 0.0, MASK_BIAS)
    return Tensor(bias.astype(dtype, copy=False))


def _split_heads(x: Tensor, n_heads: int) -> Tensor:
    b, l, d = x.shape
    return permute(reshape(x, (b, l, n_heads, d // n_heads)), (0, 2, 1, 3))


def _merge_heads(x: Tensor) -> Tensor:
    b, h, l, dh = x.shape
    return reshape(permute(x, (0, 2, 1, 3)), (b, l, h * dh))


def multi_head_attention(queries: Tensor, keys_values: Tensor, key_bias: Tensor,
                         weights: dict[str, Tensor], n_heads: int,
                         dropout_rate: float, rng, training: bool) -> Tensor:
    """Scaled dot-product attention; ``weights`` holds wq/wk/wv/wo (+biases)."""
    q = matmul(queries, weights["wq"]) + weights["bq"]
    k = matmul(keys_values, weights["wk"]) + weights["bk"]
    v = matmul(keys_values, weights["wv"]) + weights["bv"]
    q, k, v = (_split_heads(t, n_heads) for t in (q, k, v))
    scale = 1.0 / np.sqrt(q.shape[-1])
    scores = matmul(q, transpose_last(k)) * scale + key_bias
    probs = softmax_rows(scores)
    probs = dropout(probs, dropout_rate, rng, training)
    return matmul(_merge_heads(matmul(probs, v)), weights["wo"]) + weights["bo"]


def _feed_forward(x: Tensor, weights: ModelWeights, prefix: str) -> Tensor:
    hidden = gelu(matmul(x, weights[f"{prefix}.w1"]) + weights[f"{prefix}.b1"])
    return matmul(hidden, weights[f"{prefix}.w2"]) + weights[f"{prefix}.b2"]


def _residual_norm(x: Tensor, sublayer_out: Tensor, weights: ModelWeights, prefix: str,
                   dropout_rate: float, rng, training: bool) -> Tensor:
    return layer_norm(x + dropout(sublayer_out, dropout_rate, rng, training),
                      weights[f"{prefix}.g"], weights[f"{prefix}.b"], eps=LN_EPS)


def encoder_forward(embeddings: Tensor, attention_mask: np.ndarray,
                    weights: ModelWeights, config: ModelConfig,
                    rng=None, training: bool = False) -> Tensor:
    """Post-norm transformer stack over already-embedded inputs."""
    bias = attention_bias(attention_mask, embeddings.data.dtype)
    x = dropout(embeddings, config.dropout, rng, training)
    for i in range(config.n_layers):
        attn = multi_head_attention(x, x, bias, weights.subset(f"enc{i}.attn"),
                                    config.n_heads, config.dropout, rng, training)
        x = _residual_norm(x, attn, weights, f"enc{i}.ln1", config.dropout, rng, training)
        ff = _feed_forward(x, weights, f"enc{i}.ff")
        x = _residual_norm(x, ff, weights, f"enc{i}.ln2", config.dropout, rng, training)
    return x


def visit_type_decoder_forward(encoder_out: Tensor, masked_type_ids: np.ndarray,
                               time_years: np.ndarray, age_years: np.ndarray,
                               attention_mask: np.ndarray, weights: ModelWeights,
                               config: ModelConfig, rng=None, training: bool = False) -> Tensor:
    """Predict visit types from temporal type queries attending over the encoder.

    Queries are type-embedding lookups fused with time/age through the same
    kind of pathway the concept embeddings use (their own parameters). One
    decoder block: optional self-attention, cross-attention, feed-forward,
    each with residual + norm; a linear head emits per-position type logits.
    """
    if not config.vtp_enabled:
        raise ValueError("visit-type decoder requested but vtp_enabled is off")
    base = embedding_lookup(weights["type_emb"], masked_type_ids)
    dtype = weights["type_emb"].data.dtype
    x = _temporal_fusion(base, time_years, age_years, weights, "vtp",
                         config.embedding_mode, dtype)
    bias = attention_bias(attention_mask, dtype)
    if config.vtp_self_attention:
        self_attn = multi_head_attention(x, x, bias, weights.subset("vtp.self"),
                                         config.n_heads, config.dropout, rng, training)
        x = _residual_norm(x, self_attn, weights, "vtp.ln_self", config.dropout, rng, training)
    cross = multi_head_attention(x, encoder_out, bias, weights.subset("vtp.cross"),
                                 config.n_heads, config.dropout, rng, training)
    x = _residual_norm(x, cross, weights, "vtp.ln_cross", config.dropout, rng, training)
    ff = _feed_forward(x, weights, "vtp.ff")
    x = _residual_norm(x, ff, weights, "vtp.ln_ff", config.dropout, rng, training)
    return matmul(x, weights["vtp.out.w"]) + weights["vtp.out.b"]
