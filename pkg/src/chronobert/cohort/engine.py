"""Turn a cohort definition plus an event store into labeled examples.

Each person contributes at most one example: candidates matching the index
rule are scanned in date order and the first one that passes every inclusion
rule becomes the person's index. Features come from a window relative to the
index date; the label asks whether the outcome rule matches strictly after
the index (so an outcome coinciding with the index never counts).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from datetime import date, timedelta

from ..errors import ValidationError
from ..data.store import DomainEvent, EventStore, VisitRecord
from .definition import CohortDefinition, CountRule, IndexRule, OutcomeRule


@dataclass(frozen=True)
class LabeledExample:
    """One person's feature window and binary outcome for a prediction task."""

    person_id: str
    index_date: date
    label: int
    feature_events: tuple[DomainEvent, ...]
    feature_start: date | None  # None when lookback is unbounded
    feature_end: date

    @property
    def n_events(self) -> int:
        return len(self.feature_events)


def _feature_window(definition: CohortDefinition, index: date) -> tuple[date | None, date]:
    if definition.layout == "prospective":
        return index, index + timedelta(days=definition.observation_days)
    start = None if definition.observation_days is None \
        else index - timedelta(days=definition.observation_days)
    return start, index - timedelta(days=definition.hold_off_days)


def _outcome_window(definition: CohortDefinition, index: date) -> tuple[date, date | None]:
    """Half-open on the left: the outcome must fall strictly after ``start``."""
    start = index
    if definition.layout == "prospective":
        start = index + timedelta(
            days=definition.observation_days + definition.hold_off_days)
    end = None if definition.prediction_days is None \
        else start + timedelta(days=definition.prediction_days)
    return start, end


def _visit_matches(visit: VisitRecord, rule) -> bool:
    if rule.visit_types and visit.visit_type not in rule.visit_types:
        return False
    if rule.discharge_to and visit.discharge_to not in rule.discharge_to:
        return False
    return True


def _index_candidates(store: EventStore, person_id: str, rule: IndexRule) -> list[date]:
    if rule.kind == "event":
        return [e.event_date for e in store.events_of_person(person_id)
                if e.concept_id in rule.concepts]
    visits = store.visits_of(person_id)
    if rule.kind == "first_visit":
        visits = visits[:1]
    dates = []
    for visit in visits:
        if not _visit_matches(visit, rule):
            continue
        if rule.kind == "visit" and rule.concepts and not any(
                e.concept_id in rule.concepts for e in store.events_of(visit.visit_id)):
            continue
        dates.append(visit.start_date if rule.anchor == "start" else visit.end_date)
    return dates


def _rule_window(rule: CountRule, index: date,
                 feature_start: date | None, feature_end: date) -> tuple[date | None, date, bool]:
    """(low, high, strict_low_is_index): bounds of the counting window."""
    if rule.window == "before":
        return None, index, True
    if rule.window == "lookback":
        return None, index, False
    return feature_start, feature_end, False


def _count_matches(store: EventStore, person_id: str, rule: CountRule,
                   low: date | None, high: date, exclusive_high_at: bool) -> int:
    if rule.concepts is None:
        dates = [v.start_date for v in store.visits_of(person_id)]
    else:
        dates = [e.event_date for e in store.events_of_person(person_id)
                 if e.concept_id in rule.concepts]
    count = 0
    for d in dates:
        if low is not None and d < low:
            continue
        if exclusive_high_at:
            if d >= high:
                continue
        elif d > high:
            continue
        count += 1
    return count


def _passes_inclusions(store: EventStore, person_id: str,
                       definition: CohortDefinition, index: date) -> bool:
    feature_start, feature_end = _feature_window(definition, index)
    for rule in definition.inclusions:
        low, high, strict = _rule_window(rule, index, feature_start, feature_end)
        count = _count_matches(store, person_id, rule, low, high, strict)
        if count < rule.min_count:
            return False
        if rule.max_count is not None and count > rule.max_count:
            return False
    return True


def _outcome_label(store: EventStore, person_id: str, rule: OutcomeRule,
                   start_exclusive: date, end_inclusive: date | None) -> int:
    if rule.kind == "event":
        dates = [e.event_date for e in store.events_of_person(person_id)
                 if e.concept_id in rule.concepts]
    else:
        dates = [v.start_date if rule.anchor == "start" else v.end_date
                 for v in store.visits_of(person_id) if _visit_matches(v, rule)]
    for d in dates:
        if d > start_exclusive and (end_inclusive is None or d <= end_inclusive):
            return 1
    return 0


def build_example(store: EventStore, person_id: str,
                  definition: CohortDefinition) -> LabeledExample | None:
    """The person's example, or None if no index candidate qualifies."""
    index = None
    for candidate in _index_candidates(store, person_id, definition.index):
        if _passes_inclusions(store, person_id, definition, candidate):
            index = candidate
            break
    if index is None:
        return None
    feature_start, feature_end = _feature_window(definition, index)
    features = tuple(
        e for e in store.events_of_person(person_id)
        if (feature_start is None or e.event_date >= feature_start)
        and e.event_date <= feature_end)
    label = _outcome_label(store, person_id, definition.outcome,
                           *_outcome_window(definition, index))
    return LabeledExample(person_id=person_id, index_date=index, label=label,
                          feature_events=features, feature_start=feature_start,
                          feature_end=feature_end)


def build_cohort(store: EventStore, definition: CohortDefinition,
                 observation_override: int | None = None) -> list[LabeledExample]:
    """All qualifying examples, one per person, in person-id order."""
    if store.n_persons == 0:
        raise ValidationError(["cannot build a cohort from an empty store"])
    if observation_override is not None:
        definition = definition.with_observation_days(observation_override)
    definition.validate()
    examples = []
    for person_id in store.person_ids:
        example = build_example(store, person_id, definition)
        if example is not None:
            examples.append(example)
    return examples


def example_timeline(store: EventStore,
                     example: LabeledExample) -> list[tuple[VisitRecord, list[DomainEvent]]]:
    """Feature events regrouped under their visits, in visit order.

    Visits with no in-window events are omitted, so the result plugs straight
    into sequence construction without empty visit brackets.
    """
    by_visit: dict[str, list[DomainEvent]] = {}
    for event in example.feature_events:
        by_visit.setdefault(event.visit_id, []).append(event)
    timeline = []
    for visit in store.visits_of(example.person_id):
        if visit.visit_id in by_visit:
            timeline.append((visit, by_visit[visit.visit_id]))
    return timeline


def label_counts(examples) -> tuple[int, int]:
    """(negatives, positives)."""
    positives = sum(e.label for e in examples)
    return len(examples) - positives, positives


def cohort_to_csv_bytes(examples) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["person_id", "index_date", "label"])
    for e in examples:
        w.writerow([e.person_id, e.index_date.isoformat(), e.label])
    return buf.getvalue().encode()
