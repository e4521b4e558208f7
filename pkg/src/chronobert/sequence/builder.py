"""Patient timelines -> token sequences.

The full representation brackets each visit's concepts with VS/VE, separates
consecutive visits with an interval token describing the gap between them
(previous visit's end to next visit's start), and alternates the visit
segment channel between 1 and 2. Three reduced representations exist for
ablations: SEP-delimited visits without interval tokens, bare concepts, and
interval tokens without VS/VE brackets.

Channel conventions:

- time_years: days since 1970-01-01 divided by 365.25, of the token's visit
  start; interval/SEP tokens carry the *following* visit's time.
- age_years: same reference dates against the person's birth date.
- visit_segment: 1/2 alternating per kept visit; interval/SEP tokens inherit
  the *preceding* visit's segment; pads are 0.
- visit_type_ids: the visit's type id for in-visit tokens, 0 elsewhere.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from datetime import date

import numpy as np

from ..errors import ValidationError
from .vocab import (
    LONG_TERM_TOKEN,
    PAD_ID,
    SEP_TOKEN,
    VE_TOKEN,
    VS_TOKEN,
    VisitTypeVocabulary,
    Vocabulary,
)

EPOCH = date(1970, 1, 1)
DAYS_PER_YEAR = 365.25

WEEK_CUTOFF_DAYS = 28
YEAR_CUTOFF_DAYS = 365


def interval_token(days: int) -> str:
    """Bucket an inter-visit gap into W0-W3 / M1-M11 / LT."""
    if days < 0:
        raise ValueError(f"negative inter-visit interval: {days}")
    if days < WEEK_CUTOFF_DAYS:
        return f"W{days // 7}"
    if days <= YEAR_CUTOFF_DAYS:
        return f"M{min(max(days // 30, 1), 11)}"
    return LONG_TERM_TOKEN


class RepresentationVariant(str, enum.Enum):
    CEHR = "cehr"
    BEHRT_STYLE = "behrt_style"
    MEDBERT_STYLE = "medbert_style"
    NO_VS_VE = "no_vs_ve"


@dataclass
class TokenSequence:
    """Parallel channels for one patient, pre-windowing or padded."""

    token_ids: np.ndarray
    time_years: np.ndarray
    age_years: np.ndarray
    visit_segment: np.ndarray
    visit_type_ids: np.ndarray
    attention_mask: np.ndarray
    person_id: str = ""

    def __len__(self) -> int:
        return int(self.token_ids.shape[0])

    def n_real(self) -> int:
        return int(self.attention_mask.sum())

    def validate(self) -> None:
        n = len(self)
        for name in ("time_years", "age_years", "visit_segment", "visit_type_ids", "attention_mask"):
            if getattr(self, name).shape != (n,):
                raise ValidationError([f"channel {name} has shape {getattr(self, name).shape}, expected ({n},)"])


def _years_since(anchor: date, when: date) -> float:
    return (when - anchor).days / DAYS_PER_YEAR


def build_from_timeline(timeline, birth_date: date, variant: RepresentationVariant,
                        vocab: Vocabulary, type_vocab: VisitTypeVocabulary,
                        person_id: str = "") -> TokenSequence:
    """Tokenize [(visit, events), ...] sorted by visit start.

    Visits whose event list is empty are skipped entirely (windowed feature
    sets can strip a visit bare); gaps are measured between consecutive kept
    visits.
    """
    variant = RepresentationVariant(variant)
    kept = [(v, evs) for v, evs in timeline if evs]
    if not kept:
        raise ValidationError([f"person {person_id!r}: no visits with events to tokenize"])

    tokens: list[int] = []
    times: list[float] = []
    ages: list[float] = []
    segments: list[int] = []
    type_ids: list[int] = []

    def push(token_id: int, t: float, a: float, seg: int, tid: int) -> None:
        tokens.append(token_id)
        times.append(t)
        ages.append(a)
        segments.append(seg)
        type_ids.append(tid)

    prev_visit = None
    prev_segment = 0
    for index, (visit, events) in enumerate(kept):
        segment = 1 if index % 2 == 0 else 2
        t = _years_since(EPOCH, visit.start_date)
        a = _years_since(birth_date, visit.start_date)
        tid = type_vocab.id_of(visit.visit_type)

        if prev_visit is not None:
            gap = (visit.start_date - prev_visit.end_date).days
            if variant in (RepresentationVariant.CEHR, RepresentationVariant.NO_VS_VE):
                push(vocab.id_of(interval_token(gap)), t, a, prev_segment, 0)
            elif variant is RepresentationVariant.BEHRT_STYLE:
                push(vocab.id_of(SEP_TOKEN), t, a, prev_segment, 0)

        if variant is RepresentationVariant.CEHR:
            push(vocab.id_of(VS_TOKEN), t, a, segment, tid)
        for event in events:
            push(vocab.encode_concept(event.concept_id), t, a, segment, tid)
        if variant is RepresentationVariant.CEHR:
            push(vocab.id_of(VE_TOKEN), t, a, segment, tid)

        prev_visit = visit
        prev_segment = segment

    n = len(tokens)
    return TokenSequence(
        token_ids=np.array(tokens, dtype=np.int64),
        time_years=np.array(times, dtype=np.float64),
        age_years=np.array(ages, dtype=np.float64),
        visit_segment=np.array(segments, dtype=np.int64),
        visit_type_ids=np.array(type_ids, dtype=np.int64),
        attention_mask=np.ones(n, dtype=bool),
        person_id=person_id,
    )


def build_sequence(store, person_id: str, variant: RepresentationVariant,
                   vocab: Vocabulary, type_vocab: VisitTypeVocabulary) -> TokenSequence:
    """Tokenize a person's full history from the store."""
    person = store.person(person_id)
    timeline = [(v, store.events_of(v.visit_id)) for v in store.visits_of(person_id)]
    return build_from_timeline(timeline, person.birth_date, variant, vocab, type_vocab, person_id)


PRETRAIN_WINDOW = "pretrain_random_slice"
FINETUNE_WINDOW = "finetune_pre_truncate"


def window(seq: TokenSequence, context_window: int, mode: str,
           rng: np.random.Generator | None = None) -> TokenSequence:
    """Fit a sequence to ``context_window`` positions.

    Longer sequences are sliced: a uniformly random contiguous slice for
    pretraining (every start offset possible), or the most recent tokens for
    fine-tuning. Shorter ones are post-padded with PAD / zeros / mask=False.
    """
    if context_window < 1:
        raise ValidationError([f"context window must be positive, got {context_window}"])
    n = len(seq)
    if n > context_window:
        if mode == PRETRAIN_WINDOW:
            if rng is None:
                raise ValidationError(["random-slice windowing requires an rng"])
            start = int(rng.integers(0, n - context_window + 1))
        elif mode == FINETUNE_WINDOW:
            start = n - context_window
        else:
            raise ValidationError([f"unknown window mode {mode!r}"])
        sl = slice(start, start + context_window)
        return TokenSequence(seq.token_ids[sl].copy(), seq.time_years[sl].copy(),
                             seq.age_years[sl].copy(), seq.visit_segment[sl].copy(),
                             seq.visit_type_ids[sl].copy(), seq.attention_mask[sl].copy(),
                             seq.person_id)
    if mode not in (PRETRAIN_WINDOW, FINETUNE_WINDOW):
        raise ValidationError([f"unknown window mode {mode!r}"])
    pad = context_window - n
    return TokenSequence(
        np.concatenate([seq.token_ids, np.full(pad, PAD_ID, dtype=np.int64)]),
        np.concatenate([seq.time_years, np.zeros(pad)]),
        np.concatenate([seq.age_years, np.zeros(pad)]),
        np.concatenate([seq.visit_segment, np.zeros(pad, dtype=np.int64)]),
        np.concatenate([seq.visit_type_ids, np.zeros(pad, dtype=np.int64)]),
        np.concatenate([seq.attention_mask, np.zeros(pad, dtype=bool)]),
        seq.person_id,
    )


def export_sequences_jsonl(path, sequences) -> None:
    """Debug export: one JSON object per sequence, channels as lists."""
    with open(path, "w") as fh:
        for seq in sequences:
            fh.write(json.dumps({
                "person_id": seq.person_id,
                "token_ids": seq.token_ids.tolist(),
                "time_years": seq.time_years.tolist(),
                "age_years": seq.age_years.tolist(),
                "visit_segment": seq.visit_segment.tolist(),
                "visit_type_ids": seq.visit_type_ids.tolist(),
                "attention_mask": seq.attention_mask.astype(int).tolist(),
            }) + "\n")
