"""Dense tensors with reverse-mode automatic differentiation.

numpy supplies the storage and kernels; the graph bookkeeping is ours. Every
operation returns a new :class:`Tensor` holding a backward closure, and
``Tensor.backward()`` walks the recorded graph in reverse topological order.

Conventions:

- float32 and float64 are the only supported dtypes (anything else is
  promoted to float64 on construction). Mixed-precision graphs are the
  caller's responsibility; scalars adopt the array operand's dtype.
- Reductions (sums, means, normalizing constants) always accumulate in
  float64 regardless of storage dtype.
- Gradients are never mutated in place once attached, so backward closures
  may hand out views without copying.
"""

from __future__ import annotations

import numpy as np

_DEBUG_CHECKS = False


def set_debug_checks(enabled: bool) -> None:
    """Toggle NaN/Inf scanning of every op result (slow; meant for tests)."""
    global _DEBUG_CHECKS
    _DEBUG_CHECKS = bool(enabled)


def debug_checks_enabled() -> bool:
    return _DEBUG_CHECKS


def _check_finite(arr: np.ndarray, op: str) -> None:
    if _DEBUG_CHECKS and not np.all(np.isfinite(arr)):
        raise FloatingPointError(f"non-finite values produced by {op}")


class Tensor:
    """An n-dimensional float array plus an optional gradient buffer.

    ``requires_grad`` marks leaves that should receive gradients; results of
    operations require grad iff any input does. After ``backward()`` the
    ``grad`` attribute of every participating tensor holds d(output)/d(self)
    as a plain numpy array of the same shape.
    """

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float64)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None
        _check_finite(arr, "Tensor()")

    # -- graph plumbing ----------------------------------------------------

    @staticmethod
    def _result(data: np.ndarray, parents: tuple["Tensor", ...], backward) -> "Tensor":
        out = Tensor.__new__(Tensor)
        out.data = data
        out.grad = None
        live = tuple(p for p in parents if p.requires_grad)
        out.requires_grad = bool(live)
        out._parents = live
        out._backward = backward if live else None
        _check_finite(data, backward.__qualname__ if backward else "op")
        return out

    def _accum(self, g: np.ndarray) -> None:
        # Addition allocates a fresh buffer, so aliased views stay safe.
        self.grad = g if self.grad is None else self.grad + g

    def backward(self, grad=None) -> None:
        """Run reverse-mode differentiation from this tensor.

        Without an explicit ``grad`` the tensor must be a scalar (seeded
        with 1.0). Visits each node exactly once, in an iteratively computed
        reverse topological order, so graph depth never hits the recursion
        limit.
        """
        if not self.requires_grad:
            raise ValueError("backward() on a tensor that does not require grad")
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without a gradient requires a scalar")
            grad = np.ones_like(self.data)
        else:
            grad = np.asarray(grad, dtype=self.data.dtype)
            if grad.shape != self.data.shape:
                raise ValueError(f"gradient shape {grad.shape} != value shape {self.data.shape}")

        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in seen:
                    stack.append((parent, False))

        self._accum(grad)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- conveniences --------------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else _fail_item(self)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}{flag})"

    # Weight tensors cross process boundaries for parallel folds; the graph
    # fields are session-local and must not travel.
    def __getstate__(self):
        return (self.data, self.requires_grad)

    def __setstate__(self, state):
        self.data, self.requires_grad = state
        self.grad = None
        self._parents = ()
        self._backward = None

    # operators -------------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def reshape(self, *shape):
        return reshape(self, shape[0] if len(shape) == 1 and isinstance(shape[0], (tuple, list)) else shape)

    def sum(self):
        return sum_all(self)

    def mean(self):
        return mean_all(self)


def _fail_item(t: Tensor):
    raise ValueError(f"item() on non-scalar tensor of shape {t.shape}")


def as_tensor(x, dtype=None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    arr = np.asarray(x, dtype=dtype)
    return Tensor(arr)


def _coerce_pair(a, b) -> tuple[Tensor, Tensor]:
    """Wrap python scalars in the other operand's dtype to avoid upcasts."""
    if not isinstance(a, Tensor) and not isinstance(b, Tensor):
        raise TypeError("at least one operand must be a Tensor")
    if not isinstance(a, Tensor):
        a = Tensor(np.asarray(a, dtype=b.data.dtype))
    if not isinstance(b, Tensor):
        b = Tensor(np.asarray(b, dtype=a.data.dtype))
    return a, b


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``g`` down to ``shape``, undoing numpy broadcasting."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# -- arithmetic --------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = _coerce_pair(a, b)
    out_data = a.data + b.data

    def backward(g):
        if a.requires_grad:
            a._accum(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(g, b.data.shape))

    return Tensor._result(out_data, (a, b), backward)


def sub(a, b) -> Tensor:
    a, b = _coerce_pair(a, b)
    out_data = a.data - b.data

    def backward(g):
        if a.requires_grad:
            a._accum(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(-g, b.data.shape))

    return Tensor._result(out_data, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = _coerce_pair(a, b)
    out_data = a.data * b.data

    def backward(g):
        if a.requires_grad:
            a._accum(_unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(g * a.data, b.data.shape))

    return Tensor._result(out_data, (a, b), backward)


def matmul(a, b) -> Tensor:
    """Batched matrix product with numpy broadcasting over leading axes."""
    a, b = _coerce_pair(a, b)
    if a.ndim < 2 or b.ndim < 2:
        raise ValueError("matmul requires tensors of rank >= 2")
    if a.shape[-1] != b.shape[-2]:
        raise ValueError(f"matmul inner extents differ: {a.shape} @ {b.shape}")
    out_data = a.data @ b.data

    def backward(g):
        if a.requires_grad:
            a._accum(_unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.data.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.data.shape))

    return Tensor._result(out_data, (a, b), backward)


# -- shape surgery ------------------------------------------------------------


def reshape(x: Tensor, shape) -> Tensor:
    out_data = x.data.reshape(shape)

    def backward(g):
        x._accum(g.reshape(x.data.shape))

    return Tensor._result(out_data, (x,), backward)


def permute(x: Tensor, axes: tuple[int, ...]) -> Tensor:
    out_data = np.transpose(x.data, axes)
    inverse = np.argsort(axes)

    def backward(g):
        x._accum(np.transpose(g, inverse))

    return Tensor._result(out_data, (x,), backward)


def transpose_last(x: Tensor) -> Tensor:
    """Swap the trailing two axes."""
    out_data = np.swapaxes(x.data, -1, -2)

    def backward(g):
        x._accum(np.swapaxes(g, -1, -2))

    return Tensor._result(out_data, (x,), backward)


def narrow(x: Tensor, axis: int, start: int, length: int) -> Tensor:
    """Slice ``length`` elements from ``start`` along ``axis``."""
    axis = axis % x.ndim
    if start < 0 or start + length > x.shape[axis]:
        raise ValueError(f"narrow [{start}:{start + length}] out of bounds for axis {axis} of {x.shape}")
    index = [slice(None)] * x.ndim
    index[axis] = slice(start, start + length)
    index = tuple(index)
    out_data = x.data[index]

    def backward(g):
        full = np.zeros_like(x.data)
        full[index] = g
        x._accum(full)

    return Tensor._result(out_data, (x,), backward)


def concat(parts: list[Tensor], axis: int = -1) -> Tensor:
    if not parts:
        raise ValueError("concat of an empty list")
    axis = axis % parts[0].ndim
    out_data = np.concatenate([p.data for p in parts], axis=axis)
    splits = np.cumsum([p.shape[axis] for p in parts])[:-1]

    def backward(g):
        for part, piece in zip(parts, np.split(g, splits, axis=axis)):
            if part.requires_grad:
                part._accum(piece)

    return Tensor._result(out_data, tuple(parts), backward)


# -- reductions ---------------------------------------------------------------


def sum_all(x: Tensor) -> Tensor:
    out_data = np.asarray(x.data.sum(dtype=np.float64), dtype=x.data.dtype)

    def backward(g):
        x._accum(np.full_like(x.data, float(g)))

    return Tensor._result(out_data, (x,), backward)


def mean_all(x: Tensor) -> Tensor:
    n = x.data.size
    if n == 0:
        raise ValueError("mean of an empty tensor")
    out_data = np.asarray(x.data.sum(dtype=np.float64) / n, dtype=x.data.dtype)

    def backward(g):
        x._accum(np.full_like(x.data, float(g) / n))

    return Tensor._result(out_data, (x,), backward)


# -- nonlinearities -----------------------------------------------------------


def tanh(x: Tensor) -> Tensor:
    out_data = np.tanh(x.data)

    def backward(g):
        x._accum(g * (1.0 - out_data * out_data))

    return Tensor._result(out_data, (x,), backward)


def sigmoid(x: Tensor) -> Tensor:
    # Branch on sign for stability at large |x|.
    out_data = np.where(x.data >= 0, 1.0 / (1.0 + np.exp(-np.abs(x.data))),
                        np.exp(-np.abs(x.data)) / (1.0 + np.exp(-np.abs(x.data))))
    out_data = out_data.astype(x.data.dtype, copy=False)

    def backward(g):
        x._accum(g * out_data * (1.0 - out_data))

    return Tensor._result(out_data, (x,), backward)


_GELU_C = np.sqrt(2.0 / np.pi)


def gelu(x: Tensor) -> Tensor:
    """Gaussian error linear unit, tanh approximation."""
    v = x.data
    inner = _GELU_C * (v + 0.044715 * v ** 3)
    t = np.tanh(inner)
    out_data = (0.5 * v * (1.0 + t)).astype(v.dtype, copy=False)

    def backward(g):
        dinner = _GELU_C * (1.0 + 3 * 0.044715 * v ** 2)
        grad = 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * dinner
        x._accum(g * grad.astype(v.dtype, copy=False))

    return Tensor._result(out_data, (x,), backward)


def sin(x: Tensor) -> Tensor:
    out_data = np.sin(x.data)

    def backward(g):
        x._accum(g * np.cos(x.data))

    return Tensor._result(out_data, (x,), backward)


# -- structured ops -----------------------------------------------------------


def softmax_rows(x: Tensor) -> Tensor:
    """Softmax over the last axis, max-shifted for overflow safety."""
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    denom = e.sum(axis=-1, keepdims=True, dtype=np.float64)
    out_data = (e / denom).astype(x.data.dtype, copy=False)

    def backward(g):
        inner = (g * out_data).sum(axis=-1, keepdims=True, dtype=np.float64)
        x._accum(out_data * (g - inner.astype(x.data.dtype, copy=False)))

    return Tensor._result(out_data, (x,), backward)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-12) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then affine.

    Variance is the biased (1/N) estimator, accumulated in float64.
    """
    if gain.shape != x.shape[-1:] or bias.shape != x.shape[-1:]:
        raise ValueError("layer_norm gain/bias must match the trailing axis")
    mu = x.data.mean(axis=-1, keepdims=True, dtype=np.float64)
    centered = x.data - mu.astype(x.data.dtype, copy=False)
    var = np.mean(centered.astype(np.float64) ** 2, axis=-1, keepdims=True)
    inv = (1.0 / np.sqrt(var + eps)).astype(x.data.dtype, copy=False)
    xhat = centered * inv
    out_data = xhat * gain.data + bias.data

    def backward(g):
        if gain.requires_grad:
            gain._accum((g * xhat).sum(axis=tuple(range(g.ndim - 1)), dtype=np.float64).astype(gain.data.dtype))
        if bias.requires_grad:
            bias._accum(g.sum(axis=tuple(range(g.ndim - 1)), dtype=np.float64).astype(bias.data.dtype))
        if x.requires_grad:
            gx = g * gain.data
            mean_gx = gx.mean(axis=-1, keepdims=True, dtype=np.float64).astype(x.data.dtype, copy=False)
            mean_gx_xhat = (gx * xhat).mean(axis=-1, keepdims=True, dtype=np.float64).astype(x.data.dtype, copy=False)
            x._accum(inv * (gx - mean_gx - xhat * mean_gx_xhat))

    return Tensor._result(out_data, (x, gain, bias), backward)


def embedding_lookup(table: Tensor, ids: np.ndarray) -> Tensor:
    """Gather rows of ``table`` by integer id; grad scatters back with np.add.at."""
    ids = np.asarray(ids)
    if not np.issubdtype(ids.dtype, np.integer):
        raise TypeError("embedding ids must be integers")
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise IndexError(f"embedding id out of range [0, {table.shape[0]})")
    out_data = table.data[ids]

    def backward(g):
        full = np.zeros_like(table.data)
        np.add.at(full, ids, g)
        table._accum(full)

    return Tensor._result(out_data, (table,), backward)


def dropout(x: Tensor, rate: float, rng: np.random.Generator | None, training: bool) -> Tensor:
    """Inverted dropout: scales kept units by 1/(1-rate) so eval needs no rescale."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x
    if rng is None:
        raise ValueError("dropout in training mode requires an rng")
    keep = (rng.random(x.shape) >= rate).astype(x.data.dtype)
    scale = x.data.dtype.type(1.0 / (1.0 - rate))
    out_data = x.data * keep * scale

    def backward(g):
        x._accum(g * keep * scale)

    return Tensor._result(out_data, (x,), backward)


def masked_cross_entropy(logits: Tensor, labels: np.ndarray, weights: np.ndarray) -> Tensor:
    """Weighted token-level cross entropy: sum(w_i * CE_i) / sum(w_i).

    ``labels`` and ``weights`` span ``logits.shape[:-1]``; weights of zero
    drop positions entirely (their labels may be arbitrary valid ids).
    Log-sum-exp runs max-shifted in float64.
    """
    labels = np.asarray(labels)
    weights = np.asarray(weights, dtype=np.float64)
    n_classes = logits.shape[-1]
    if labels.shape != logits.shape[:-1] or weights.shape != logits.shape[:-1]:
        raise ValueError("labels/weights must match logits batch shape")
    if np.any(weights < 0):
        raise ValueError("negative cross-entropy weights")
    total_w = weights.sum()
    if total_w <= 0:
        raise ValueError("masked_cross_entropy with no positive weights")
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise ValueError(f"label id out of range [0, {n_classes})")

    x = logits.data.astype(np.float64, copy=False)
    m = x.max(axis=-1, keepdims=True)
    shifted = x - m
    lse = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    log_probs = shifted - lse
    picked = np.take_along_axis(log_probs, labels[..., None], axis=-1)[..., 0]
    loss = -(weights * picked).sum() / total_w
    out_data = np.asarray(loss, dtype=logits.data.dtype)

    def backward(g):
        probs = np.exp(log_probs)
        grad = probs
        np.put_along_axis(grad, labels[..., None], np.take_along_axis(grad, labels[..., None], axis=-1) - 1.0,
                          axis=-1)
        grad *= (weights / total_w)[..., None]
        logits._accum((float(g) * grad).astype(logits.data.dtype, copy=False))

    return Tensor._result(out_data, (logits,), backward)


def binary_cross_entropy_with_logits(logits: Tensor, targets: np.ndarray) -> Tensor:
    """Mean BCE over a vector of logits; stable softplus formulation."""
    targets = np.asarray(targets, dtype=np.float64)
    if targets.shape != logits.shape:
        raise ValueError("targets must match logits shape")
    if logits.size == 0:
        raise ValueError("binary cross entropy of an empty batch")
    z = logits.data.astype(np.float64, copy=False)
    losses = np.maximum(z, 0.0) - z * targets + np.log1p(np.exp(-np.abs(z)))
    out_data = np.asarray(losses.mean(), dtype=logits.data.dtype)

    def backward(g):
        p = 1.0 / (1.0 + np.exp(-z))
        grad = (p - targets) / z.size
        logits._accum((float(g) * grad).astype(logits.data.dtype, copy=False))

    return Tensor._result(out_data, (logits,), backward)


def zero_grads(params) -> None:
    """Clear gradients on an iterable (or mapping) of tensors."""
    values = params.values() if hasattr(params, "values") else params
    for p in values:
        p.grad = None
