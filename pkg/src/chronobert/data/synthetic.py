"""Synthetic longitudinal stores with plantable, learnable structure.

Patient timelines are sampled visit by visit; three optional signals give
models something real to find:

- gap markers: designated concepts appear (with probability ``p_gap``) only
  in visits that follow a >365-day gap, so gap-awareness is learnable from
  concepts alone — noisily.
- seasonal concepts: appear only in configured calendar months.
- visit-type profiles: each (visit_type, domain) pair draws concepts from its
  own permuted Zipf profile instead of the shared uniform background.

A fourth toggle plants a prediction task: every patient's last regular visit
carries an index-marker concept, and a follow-up visit 30-180 days later
carries an outcome concept with high probability iff the history contains at
least one >365-day gap. Long-gap structure is decided by the timing stream,
so toggling any signal never perturbs the others (each consumes only its own
named substream).
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from datetime import date, timedelta

import numpy as np

from ..errors import ValidationError
from ..rng import derive_rng
from .store import DEFAULT_VISIT_TYPES, DomainEvent, EventStore, Person, VisitRecord

GAP_SIGNAL_THRESHOLD_DAYS = 365


def _default_type_mixture() -> dict[str, float]:
    return {
        "outpatient": 0.45,
        "office": 0.20,
        "inpatient": 0.12,
        "emergency": 0.10,
        "exam": 0.06,
        "emergency_inpatient": 0.04,
        "home": 0.03,
    }


@dataclass
class SynthConfig:
    n_patients: int = 1000
    mean_visits: float = 8.0
    mean_events_per_visit: float = 3.0
    n_condition_concepts: int = 60
    n_medication_concepts: int = 40
    n_procedure_concepts: int = 30
    visit_type_mixture: dict[str, float] = field(default_factory=_default_type_mixture)
    first_visit_start: date = date(2008, 1, 1)
    first_visit_end: date = date(2016, 12, 31)
    birth_year_min: int = 1935
    birth_year_max: int = 2004
    short_gap_min_days: int = 7
    short_gap_max_days: int = 180
    long_gap_min_days: int = 400
    long_gap_max_days: int = 720
    long_gap_patient_rate: float = 0.5
    extra_long_gap_rate: float = 0.1
    inpatient_stay_max_days: int = 14

    gap_signal: bool = True
    p_gap: float = 0.6
    n_gap_concepts: int = 2

    seasonal_signal: bool = False
    p_seasonal: float = 0.3
    seasonal_months: tuple[int, ...] = (12, 1, 2)
    n_seasonal_concepts: int = 2

    visit_type_signal: bool = True
    zipf_exponent: float = 1.0

    outcome_signal: bool = False
    p_outcome_given_long_gap: float = 0.9
    p_outcome_no_long_gap: float = 0.1
    outcome_gap_min_days: int = 30
    outcome_gap_max_days: int = 180

    mortality_rate: float = 0.15

    def validate(self) -> None:
        problems = []
        if self.n_patients < 1:
            problems.append("n_patients must be positive")
        if self.mean_visits < 1:
            problems.append("mean_visits must be at least 1")
        if self.mean_events_per_visit < 1:
            problems.append("mean_events_per_visit must be at least 1")
        for name in ("p_gap", "p_seasonal", "long_gap_patient_rate", "extra_long_gap_rate",
                     "p_outcome_given_long_gap", "p_outcome_no_long_gap", "mortality_rate"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                problems.append(f"{name} must be in [0, 1], got {value}")
        if min(self.n_condition_concepts, self.n_medication_concepts, self.n_procedure_concepts) < 1:
            problems.append("all concept pools must be non-empty")
        if self.short_gap_min_days < 0 or self.short_gap_max_days < self.short_gap_min_days:
            problems.append("short gap range is invalid")
        if self.long_gap_min_days <= GAP_SIGNAL_THRESHOLD_DAYS:
            problems.append("long gaps must exceed 365 days")
        if self.long_gap_max_days < self.long_gap_min_days:
            problems.append("long gap range is invalid")
        if self.short_gap_max_days > GAP_SIGNAL_THRESHOLD_DAYS:
            problems.append("short gaps must stay at or below 365 days")
        unknown = set(self.visit_type_mixture) - set(DEFAULT_VISIT_TYPES)
        if unknown:
            problems.append(f"unknown visit types in mixture: {sorted(unknown)}")
        if not self.visit_type_mixture or min(self.visit_type_mixture.values()) < 0:
            problems.append("visit type mixture must be non-empty and non-negative")
        if self.birth_year_max < self.birth_year_min:
            problems.append("birth year range is invalid")
        if self.first_visit_end < self.first_visit_start:
            problems.append("first visit range is invalid")
        if problems:
            raise ValidationError(problems)

    def concept_pool(self, domain: str) -> list[str]:
        prefix, count = {
            "condition": ("c", self.n_condition_concepts),
            "medication": ("m", self.n_medication_concepts),
            "procedure": ("p", self.n_procedure_concepts),
        }[domain]
        return [f"{prefix}_{i}" for i in range(1, count + 1)]

    @property
    def gap_concepts(self) -> list[str]:
        return [f"gap_{i}" for i in range(self.n_gap_concepts)]

    @property
    def seasonal_concepts(self) -> list[str]:
        return [f"seas_{i}" for i in range(self.n_seasonal_concepts)]


INDEX_CONCEPT = "idx_event"
OUTCOME_CONCEPT = "outcome_gap"

_DOMAIN_MIX = (("condition", 0.5), ("medication", 0.3), ("procedure", 0.2))


def _type_profiles(config: SynthConfig, seed: int) -> dict[tuple[str, str], np.ndarray]:
    """Per-(visit_type, domain) concept distributions: permuted Zipf weights."""
    rng = derive_rng(seed, "profiles")
    profiles = {}
    types = sorted(config.visit_type_mixture)
    for vtype in types:
        for domain, _ in _DOMAIN_MIX:
            n = len(config.concept_pool(domain))
            ranks = 1.0 / np.arange(1, n + 1, dtype=np.float64) ** config.zipf_exponent
            perm = rng.permutation(n)
            weights = np.empty(n)
            weights[perm] = ranks
            profiles[(vtype, domain)] = weights / weights.sum()
    return profiles


def generate_synthetic(config: SynthConfig, seed: int) -> EventStore:
    """Sample a store; identical (config, seed) pairs give identical stores."""
    config.validate()
    demo = derive_rng(seed, "demographics")
    timing = derive_rng(seed, "timing")
    types_rng = derive_rng(seed, "visit_types")
    concepts_rng = derive_rng(seed, "concepts")
    gap_rng = derive_rng(seed, "gap_signal")
    seasonal_rng = derive_rng(seed, "seasonal_signal")
    outcome_rng = derive_rng(seed, "outcome_signal")
    mortality_rng = derive_rng(seed, "mortality")

    profiles = _type_profiles(config, seed) if config.visit_type_signal else None
    type_names = sorted(config.visit_type_mixture)
    type_probs = np.array([config.visit_type_mixture[t] for t in type_names], dtype=np.float64)
    type_probs = type_probs / type_probs.sum()
    pools = {domain: config.concept_pool(domain) for domain, _ in _DOMAIN_MIX}
    domain_names = [d for d, _ in _DOMAIN_MIX]
    domain_probs = np.array([w for _, w in _DOMAIN_MIX])

    first_span = (config.first_visit_end - config.first_visit_start).days

    persons: list[Person] = []
    visits: list[VisitRecord] = []
    events: list[DomainEvent] = []

    def sample_events(pid: str, visit: VisitRecord, n_events: int, stream: np.random.Generator) -> None:
        span = (visit.end_date - visit.start_date).days
        domains = stream.choice(len(domain_names), size=n_events, p=domain_probs)
        offsets = stream.integers(0, span + 1, size=n_events)
        for d_idx, off in zip(domains, offsets):
            domain = domain_names[d_idx]
            pool = pools[domain]
            if profiles is not None:
                concept = pool[int(stream.choice(len(pool), p=profiles[(visit.visit_type, domain)]))]
            else:
                concept = pool[int(stream.integers(0, len(pool)))]
            events.append(DomainEvent(pid, visit.visit_id, domain, concept,
                                      visit.start_date + timedelta(days=int(off))))

    def make_visit(pid: str, n: int, start: date, vtype: str, stream: np.random.Generator) -> VisitRecord:
        if vtype in ("inpatient", "emergency_inpatient"):
            stay = int(stream.integers(1, config.inpatient_stay_max_days + 1))
            discharge = ("home", "nursing_facility", "other_facility")[int(stream.integers(0, 3))]
        else:
            stay = 0
            discharge = None
        return VisitRecord(f"{pid}v{n}", pid, vtype, start, start + timedelta(days=stay), discharge)

    for i in range(config.n_patients):
        pid = f"p{i:06d}"
        birth = date(int(demo.integers(config.birth_year_min, config.birth_year_max + 1)),
                     int(demo.integers(1, 13)), int(demo.integers(1, 29)))
        gender = ("female", "male", "other")[int(demo.choice(3, p=[0.49, 0.49, 0.02]))]
        persons.append(Person(pid, birth, gender))

        n_vis = 1 + int(timing.poisson(max(config.mean_visits - 1.0, 0.0)))
        n_gaps = n_vis - 1
        is_long_patient = bool(timing.random() < config.long_gap_patient_rate)
        gap_is_long = np.zeros(n_gaps, dtype=bool)
        if n_gaps > 0 and is_long_patient:
            n_long = 1 + int(timing.binomial(n_gaps - 1, config.extra_long_gap_rate)) if n_gaps > 1 else 1
            long_slots = timing.choice(n_gaps, size=min(n_long, n_gaps), replace=False)
            gap_is_long[long_slots] = True
        short_days = timing.integers(config.short_gap_min_days, config.short_gap_max_days + 1, size=n_gaps)
        long_days = timing.integers(config.long_gap_min_days, config.long_gap_max_days + 1, size=n_gaps)

        vtypes = [type_names[int(k)] for k in types_rng.choice(len(type_names), size=n_vis + 1, p=type_probs)]
        start = config.first_visit_start + timedelta(days=int(timing.integers(0, first_span + 1)))

        person_visits: list[VisitRecord] = []
        for j in range(n_vis):
            visit = make_visit(pid, j, start, vtypes[j], timing)
            person_visits.append(visit)
            n_ev = 1 + int(concepts_rng.poisson(config.mean_events_per_visit - 1.0))
            sample_events(pid, visit, n_ev, concepts_rng)
            if j > 0 and gap_is_long[j - 1] and config.gap_signal:
                if float(gap_rng.random()) < config.p_gap:
                    marker = config.gap_concepts[int(gap_rng.integers(0, len(config.gap_concepts)))]
                    events.append(DomainEvent(pid, visit.visit_id, "condition", marker, visit.start_date))
            if config.seasonal_signal and visit.start_date.month in config.seasonal_months:
                if float(seasonal_rng.random()) < config.p_seasonal:
                    sc = config.seasonal_concepts[int(seasonal_rng.integers(0, len(config.seasonal_concepts)))]
                    events.append(DomainEvent(pid, visit.visit_id, "condition", sc, visit.start_date))
            if j < n_gaps:
                gap = int(long_days[j]) if gap_is_long[j] else int(short_days[j])
                start = visit.end_date + timedelta(days=gap)

        if config.outcome_signal:
            # The follow-up visit draws everything from the outcome stream so
            # that disabling it leaves every other patient's timeline intact.
            last = person_visits[-1]
            events.append(DomainEvent(pid, last.visit_id, "condition", INDEX_CONCEPT, last.start_date))
            follow_gap = int(outcome_rng.integers(config.outcome_gap_min_days, config.outcome_gap_max_days + 1))
            follow = make_visit(pid, n_vis, last.end_date + timedelta(days=follow_gap), vtypes[n_vis],
                                outcome_rng)
            person_visits.append(follow)
            n_ev = 1 + int(outcome_rng.poisson(config.mean_events_per_visit - 1.0))
            sample_events(pid, follow, n_ev, outcome_rng)
            p_out = config.p_outcome_given_long_gap if gap_is_long.any() else config.p_outcome_no_long_gap
            if float(outcome_rng.random()) < p_out:
                events.append(DomainEvent(pid, follow.visit_id, "condition", OUTCOME_CONCEPT,
                                          follow.start_date))

        # Terminal discharges: the draw is unconditional so the stream stays
        # aligned across patients whatever their final visit type is.
        dies = float(mortality_rng.random()) < config.mortality_rate
        if dies and person_visits[-1].visit_type in ("inpatient", "emergency_inpatient"):
            person_visits[-1] = replace(person_visits[-1], discharge_to="expired")

        visits.extend(person_visits)

    return EventStore(persons, visits, events)


def synthetic_hierarchy(config: SynthConfig) -> dict[str, str]:
    """Roll concepts up to coarse groups of ten; every 7th id stays unmapped."""
    mapping: dict[str, str] = {}
    for domain, prefix in (("condition", "c"), ("medication", "m"), ("procedure", "p")):
        for idx, concept in enumerate(config.concept_pool(domain), start=1):
            if idx % 7 == 0:
                continue
            mapping[concept] = f"{prefix}grp_{(idx - 1) // 10}"
    for concept in config.gap_concepts:
        mapping[concept] = "gap_group"
    for concept in config.seasonal_concepts:
        mapping[concept] = "seasonal_group"
    return mapping


def config_from_dict(data: dict) -> SynthConfig:
    """Build a SynthConfig from TOML-shaped primitives, rejecting unknown keys."""
    known = {f.name for f in fields(SynthConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ValidationError([f"unknown synth option {k!r}" for k in unknown])
    converted = dict(data)
    for key in ("first_visit_start", "first_visit_end"):
        if key in converted and isinstance(converted[key], str):
            converted[key] = date.fromisoformat(converted[key])
    for key in ("seasonal_months",):
        if key in converted:
            converted[key] = tuple(converted[key])
    return replace(SynthConfig(), **converted)
