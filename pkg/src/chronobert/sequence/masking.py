"""Training-time masking for the two pretraining objectives.

Both maskers work on integer id arrays of any shape (single sequences or
whole batches) and return (masked_ids, labels, weights): labels keep the
original ids everywhere, weights are 1.0 exactly at scored positions.
"""

from __future__ import annotations

import numpy as np

from ..errors import ValidationError
from .vocab import FIRST_CONCEPT_ID, FIRST_REAL_TYPE_ID, MASK_ID, PAD_ID, TYPE_MASK_ID


def maskable_positions(token_ids: np.ndarray, attention_mask: np.ndarray,
                       mask_artificial: bool = True) -> np.ndarray:
    """Positions eligible for token masking.

    Pads and positions already holding the mask token are never eligible;
    structural tokens (SEP/VS/VE/interval) are eligible unless
    ``mask_artificial`` is off.
    """
    eligible = attention_mask & (token_ids != PAD_ID) & (token_ids != MASK_ID)
    if not mask_artificial:
        eligible = eligible & (token_ids >= FIRST_CONCEPT_ID)
    return eligible


def apply_token_mask(token_ids: np.ndarray, maskable: np.ndarray, vocab_size: int,
                     rng: np.random.Generator, rate: float = 0.15,
                     proportions: tuple[float, float, float] = (0.8, 0.1, 0.1)):
    """BERT-style masking: select ~rate of maskable positions, then 80/10/10.

    Selected positions become MASK with probability ``proportions[0]``, a
    random non-pad/non-mask token with ``proportions[1]``, and stay unchanged
    otherwise. If the Bernoulli pass selects nothing, one maskable position
    is forced so every training step has signal.
    """
    token_ids = np.asarray(token_ids)
    maskable = np.asarray(maskable, dtype=bool)
    if maskable.shape != token_ids.shape:
        raise ValidationError(["maskable must match token_ids shape"])
    if not 0.0 < rate <= 1.0:
        raise ValidationError([f"mask rate must be in (0, 1], got {rate}"])
    if abs(sum(proportions) - 1.0) > 1e-9 or min(proportions) < 0:
        raise ValidationError([f"mask proportions must be non-negative and sum to 1, got {proportions}"])
    if not maskable.any():
        raise ValidationError(["no maskable positions in batch"])

    selected = maskable & (rng.random(token_ids.shape) < rate)
    if not selected.any():
        flat_candidates = np.flatnonzero(maskable.reshape(-1))
        forced = flat_candidates[int(rng.integers(0, flat_candidates.size))]
        selected = selected.reshape(-1)
        selected[forced] = True
        selected = selected.reshape(token_ids.shape)

    labels = token_ids.copy()
    weights = selected.astype(np.float64)
    masked = token_ids.copy()

    action = rng.random(token_ids.shape)
    to_mask = selected & (action < proportions[0])
    to_random = selected & (action >= proportions[0]) & (action < proportions[0] + proportions[1])
    masked[to_mask] = MASK_ID
    n_random = int(to_random.sum())
    if n_random:
        # replacements can be any real token: everything except PAD and MASK
        masked[to_random] = rng.integers(2, vocab_size, size=n_random)
    return masked, labels, weights


def apply_visit_type_mask(type_ids: np.ndarray, rng: np.random.Generator, rate: float = 0.5):
    """Mask ~rate of typed positions with the reserved type-mask id.

    Only positions carrying a real visit type (id >= 2) participate; the
    none/pad id never does. As with token masking, an empty selection forces
    one position.
    """
    type_ids = np.asarray(type_ids)
    if not 0.0 < rate <= 1.0:
        raise ValidationError([f"visit-type mask rate must be in (0, 1], got {rate}"])
    typed = type_ids >= FIRST_REAL_TYPE_ID
    if not typed.any():
        raise ValidationError(["no typed positions to mask"])

    selected = typed & (rng.random(type_ids.shape) < rate)
    if not selected.any():
        flat_candidates = np.flatnonzero(typed.reshape(-1))
        forced = flat_candidates[int(rng.integers(0, flat_candidates.size))]
        selected = selected.reshape(-1)
        selected[forced] = True
        selected = selected.reshape(type_ids.shape)

    labels = type_ids.copy()
    weights = selected.astype(np.float64)
    masked = type_ids.copy()
    masked[selected] = TYPE_MASK_ID
    return masked, labels, weights
