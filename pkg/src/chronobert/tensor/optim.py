"""Adam with bias correction, and the per-epoch cosine schedule."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .tensor import Tensor


@dataclass
class AdamState:
    """First/second moment buffers keyed like the parameter dict."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def for_params(cls, params: dict[str, Tensor], **kwargs) -> "AdamState":
        return cls(m={k: np.zeros_like(p.data) for k, p in params.items()},
                   v={k: np.zeros_like(p.data) for k, p in params.items()},
                   **kwargs)


def adam_step(params: dict[str, Tensor], grads: dict[str, np.ndarray],
              state: AdamState, lr: float) -> AdamState:
    """Apply one Adam update in place and return the advanced state.

    Only parameters present in ``grads`` move; moments still advance on the
    updated keys only, so sparse steps stay consistent with their own history.
    """
    state.step_count += 1
    t = state.step_count
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    for name, grad in grads.items():
        if name not in params:
            raise KeyError(f"gradient for unknown parameter {name!r}")
        p = params[name]
        if grad is None:
            continue
        if grad.shape != p.data.shape:
            raise ValueError(f"gradient shape {grad.shape} != parameter shape {p.data.shape} for {name!r}")
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * grad
        v *= state.beta2
        v += (1.0 - state.beta2) * (grad * grad)
        update = (m / bc1) / (np.sqrt(v / bc2) + state.epsilon)
        p.data = p.data - lr * update.astype(p.data.dtype, copy=False)
    return state


@dataclass
class LrSchedule:
    """Cosine annealing evaluated once per epoch."""

    initial_lr: float = 2e-4
    eta_min: float = 0.0
    period_epochs: int = 5

    def __post_init__(self):
        if self.period_epochs < 1:
            raise ValueError("schedule period must be at least one epoch")
        if self.eta_min > self.initial_lr:
            raise ValueError("eta_min exceeds the initial learning rate")


def cosine_lr(schedule: LrSchedule, epoch: int) -> float:
    """Learning rate for ``epoch`` in [0, period]; endpoint hits eta_min exactly."""
    if not 0 <= epoch <= schedule.period_epochs:
        raise ValueError(f"epoch {epoch} outside [0, {schedule.period_epochs}]")
    span = schedule.initial_lr - schedule.eta_min
    return schedule.eta_min + span * (1.0 + math.cos(math.pi * epoch / schedule.period_epochs)) / 2.0
