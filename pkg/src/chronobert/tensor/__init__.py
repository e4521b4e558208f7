from .tensor import (
    Tensor,
    add,
    as_tensor,
    binary_cross_entropy_with_logits,
    concat,
    debug_checks_enabled,
    dropout,
    embedding_lookup,
    gelu,
    layer_norm,
    masked_cross_entropy,
    matmul,
    mean_all,
    mul,
    narrow,
    permute,
    reshape,
    set_debug_checks,
    sigmoid,
    sin,
    softmax_rows,
    sub,
    sum_all,
    tanh,
    transpose_last,
    zero_grads,
)
from .lstm import bilstm_forward
from .optim import AdamState, LrSchedule, adam_step, cosine_lr
from .serialize import MAGIC, VERSION, WeightFormatError, load_weights, save_weights

__all__ = [
    "AdamState",
    "LrSchedule",
    "MAGIC",
    "Tensor",
    "VERSION",
    "WeightFormatError",
    "adam_step",
    "add",
    "as_tensor",
    "bilstm_forward",
    "binary_cross_entropy_with_logits",
    "concat",
    "cosine_lr",
    "debug_checks_enabled",
    "dropout",
    "embedding_lookup",
    "gelu",
    "layer_norm",
    "load_weights",
    "masked_cross_entropy",
    "matmul",
    "mean_all",
    "mul",
    "narrow",
    "permute",
    "reshape",
    "save_weights",
    "set_debug_checks",
    "sigmoid",
    "sin",
    "softmax_rows",
    "sub",
    "sum_all",
    "tanh",
    "transpose_last",
    "zero_grads",
]
