"""Normalized longitudinal event data: persons, visits, and coded events.

Three CSV files make up a store on disk:

    persons.csv  person_id,birth_date,gender
    visits.csv   visit_id,person_id,visit_type,start_date,end_date,discharge_to
    events.csv   person_id,visit_id,domain,concept_id,event_date

Dates are ISO YYYY-MM-DD. ``discharge_to`` may be empty. Loading validates
referential integrity, date ordering, enum membership, and that no person's
visits overlap; every violation found is reported, not just the first.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from datetime import date
from pathlib import Path

from ..errors import StoreError

GENDERS = ("female", "male", "other")
DOMAINS = ("condition", "medication", "procedure")
DEFAULT_VISIT_TYPES = (
    "emergency",
    "emergency_inpatient",
    "exam",
    "home",
    "inpatient",
    "office",
    "outpatient",
)
DISCHARGE_DESTINATIONS = ("home", "nursing_facility", "other_facility", "expired")


@dataclass(frozen=True)
class Person:
    person_id: str
    birth_date: date
    gender: str


@dataclass(frozen=True)
class VisitRecord:
    visit_id: str
    person_id: str
    visit_type: str
    start_date: date
    end_date: date
    discharge_to: str | None


@dataclass(frozen=True)
class DomainEvent:
    person_id: str
    visit_id: str
    domain: str
    concept_id: str
    event_date: date


class EventStore:
    """An in-memory store with per-person chronology precomputed.

    ``visits_of(pid)`` returns visits sorted by (start_date, visit_id);
    ``events_of(vid)`` returns events sorted by (event_date, domain,
    concept_id). Construction validates everything once so downstream code
    can assume the invariants.
    """

    def __init__(self, persons, visits, events, visit_types=DEFAULT_VISIT_TYPES):
        self.visit_types = tuple(visit_types)
        self._persons: dict[str, Person] = {}
        self._visits: dict[str, VisitRecord] = {}
        self._visits_by_person: dict[str, list[VisitRecord]] = {}
        self._events_by_visit: dict[str, list[DomainEvent]] = {}
        self._events_by_person: dict[str, list[DomainEvent]] = {}
        problems: list[str] = []

        for p in persons:
            if p.person_id in self._persons:
                problems.append(f"duplicate person_id {p.person_id!r}")
            if p.gender not in GENDERS:
                problems.append(f"person {p.person_id!r}: unknown gender {p.gender!r}")
            self._persons[p.person_id] = p
            self._visits_by_person[p.person_id] = []
            self._events_by_person[p.person_id] = []

        for v in visits:
            if v.visit_id in self._visits:
                problems.append(f"duplicate visit_id {v.visit_id!r}")
            if v.person_id not in self._persons:
                problems.append(f"visit {v.visit_id!r}: unknown person {v.person_id!r}")
                continue
            if v.visit_type not in self.visit_types:
                problems.append(f"visit {v.visit_id!r}: unknown visit_type {v.visit_type!r}")
            if v.end_date < v.start_date:
                problems.append(f"visit {v.visit_id!r}: end_date precedes start_date")
            if v.discharge_to is not None and v.discharge_to not in DISCHARGE_DESTINATIONS:
                problems.append(f"visit {v.visit_id!r}: unknown discharge_to {v.discharge_to!r}")
            self._visits[v.visit_id] = v
            self._visits_by_person[v.person_id].append(v)
            self._events_by_visit[v.visit_id] = []

        for e in events:
            visit = self._visits.get(e.visit_id)
            if visit is None:
                problems.append(f"event {e.concept_id!r}: unknown visit {e.visit_id!r}")
                continue
            if e.person_id != visit.person_id:
                problems.append(
                    f"event {e.concept_id!r} on visit {e.visit_id!r}: person mismatch "
                    f"({e.person_id!r} vs {visit.person_id!r})")
                continue
            if e.domain not in DOMAINS:
                problems.append(f"event {e.concept_id!r}: unknown domain {e.domain!r}")
            if not (visit.start_date <= e.event_date <= visit.end_date):
                problems.append(
                    f"event {e.concept_id!r} on visit {e.visit_id!r}: date {e.event_date} "
                    f"outside visit span {visit.start_date}..{visit.end_date}")
            person = self._persons[visit.person_id]
            if e.event_date <= person.birth_date:
                problems.append(
                    f"event {e.concept_id!r} for person {person.person_id!r}: "
                    f"date {e.event_date} does not follow birth {person.birth_date}")
            self._events_by_visit[e.visit_id].append(e)
            self._events_by_person[visit.person_id].append(e)

        for pid, vs in self._visits_by_person.items():
            vs.sort(key=lambda v: (v.start_date, v.visit_id))
            for prev, nxt in zip(vs, vs[1:]):
                if nxt.start_date < prev.end_date:
                    problems.append(
                        f"person {pid!r}: visit {nxt.visit_id!r} starts {nxt.start_date}, "
                        f"before visit {prev.visit_id!r} ends {prev.end_date}")
        for vid in self._events_by_visit:
            self._events_by_visit[vid].sort(key=lambda e: (e.event_date, e.domain, e.concept_id))
        for pid in self._events_by_person:
            self._events_by_person[pid].sort(key=lambda e: (e.event_date, e.visit_id, e.domain, e.concept_id))

        if problems:
            raise StoreError(problems)

    # -- access ---------------------------------------------------------------

    @property
    def person_ids(self) -> list[str]:
        return sorted(self._persons)

    def person(self, person_id: str) -> Person:
        if person_id not in self._persons:
            raise KeyError(f"unknown person {person_id!r}")
        return self._persons[person_id]

    def visit(self, visit_id: str) -> VisitRecord:
        return self._visits[visit_id]

    def visits_of(self, person_id: str) -> list[VisitRecord]:
        if person_id not in self._persons:
            raise KeyError(f"unknown person {person_id!r}")
        return list(self._visits_by_person[person_id])

    def events_of(self, visit_id: str) -> list[DomainEvent]:
        return list(self._events_by_visit.get(visit_id, ()))

    def events_of_person(self, person_id: str) -> list[DomainEvent]:
        if person_id not in self._persons:
            raise KeyError(f"unknown person {person_id!r}")
        return list(self._events_by_person[person_id])

    @property
    def n_persons(self) -> int:
        return len(self._persons)

    @property
    def n_visits(self) -> int:
        return len(self._visits)

    @property
    def n_events(self) -> int:
        return sum(len(es) for es in self._events_by_visit.values())

    def all_visits(self) -> list[VisitRecord]:
        return [v for pid in self.person_ids for v in self._visits_by_person[pid]]

    def all_events(self) -> list[DomainEvent]:
        return [e for pid in self.person_ids for e in self._events_by_person[pid]]

    def concept_ids(self) -> list[str]:
        return sorted({e.concept_id for es in self._events_by_visit.values() for e in es})

    def __eq__(self, other) -> bool:
        if not isinstance(other, EventStore):
            return NotImplemented
        return (self._persons == other._persons
                and self._visits == other._visits
                and self._events_by_visit == other._events_by_visit
                and self.visit_types == other.visit_types)


# -- CSV IO --------------------------------------------------------------------

PERSON_COLUMNS = ("person_id", "birth_date", "gender")
VISIT_COLUMNS = ("visit_id", "person_id", "visit_type", "start_date", "end_date", "discharge_to")
EVENT_COLUMNS = ("person_id", "visit_id", "domain", "concept_id", "event_date")


def _parse_date(value: str, context: str, problems: list[str]) -> date:
    try:
        return date.fromisoformat(value)
    except ValueError:
        problems.append(f"{context}: bad date {value!r}")
        return date(1900, 1, 1)


def _read_rows(path: Path, columns: tuple[str, ...], problems: list[str]):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != columns:
            problems.append(f"{path.name}: header {reader.fieldnames} != expected {list(columns)}")
            return []
        return list(reader)


def load_store(directory, visit_types=DEFAULT_VISIT_TYPES) -> EventStore:
    """Load persons.csv / visits.csv / events.csv from ``directory``."""
    directory = Path(directory)
    problems: list[str] = []
    persons, visits, events = [], [], []

    for name in ("persons.csv", "visits.csv", "events.csv"):
        if not (directory / name).exists():
            problems.append(f"missing {name} in {directory}")
    if problems:
        raise StoreError(problems)

    for row in _read_rows(directory / "persons.csv", PERSON_COLUMNS, problems):
        persons.append(Person(row["person_id"],
                              _parse_date(row["birth_date"], f"person {row['person_id']!r}", problems),
                              row["gender"]))
    for row in _read_rows(directory / "visits.csv", VISIT_COLUMNS, problems):
        visits.append(VisitRecord(
            row["visit_id"], row["person_id"], row["visit_type"],
            _parse_date(row["start_date"], f"visit {row['visit_id']!r}", problems),
            _parse_date(row["end_date"], f"visit {row['visit_id']!r}", problems),
            row["discharge_to"] or None))
    for row in _read_rows(directory / "events.csv", EVENT_COLUMNS, problems):
        events.append(DomainEvent(
            row["person_id"], row["visit_id"], row["domain"], row["concept_id"],
            _parse_date(row["event_date"], f"event {row['concept_id']!r}", problems)))

    if problems:
        raise StoreError(problems)
    return EventStore(persons, visits, events, visit_types)


def store_to_csv_bytes(store: EventStore) -> dict[str, bytes]:
    """Serialize to the three canonical CSVs, rows in deterministic order."""
    out: dict[str, bytes] = {}

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PERSON_COLUMNS)
    for pid in store.person_ids:
        p = store.person(pid)
        w.writerow([p.person_id, p.birth_date.isoformat(), p.gender])
    out["persons.csv"] = buf.getvalue().encode()

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(VISIT_COLUMNS)
    for v in store.all_visits():
        w.writerow([v.visit_id, v.person_id, v.visit_type, v.start_date.isoformat(),
                    v.end_date.isoformat(), v.discharge_to or ""])
    out["visits.csv"] = buf.getvalue().encode()

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(EVENT_COLUMNS)
    for v in store.all_visits():
        for e in store.events_of(v.visit_id):
            w.writerow([e.person_id, e.visit_id, e.domain, e.concept_id, e.event_date.isoformat()])
    out["events.csv"] = buf.getvalue().encode()
    return out


def emit_store(store: EventStore, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name, blob in store_to_csv_bytes(store).items():
        (directory / name).write_bytes(blob)


def load_hierarchy(path) -> dict[str, str]:
    """Read concept_id -> rollup_code pairs from hierarchy.csv."""
    path = Path(path)
    mapping: dict[str, str] = {}
    problems: list[str] = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != ("concept_id", "rollup_code"):
            raise StoreError([f"{path.name}: header must be concept_id,rollup_code"])
        for row in reader:
            cid = row["concept_id"]
            if cid in mapping and mapping[cid] != row["rollup_code"]:
                problems.append(f"hierarchy maps {cid!r} to both {mapping[cid]!r} and {row['rollup_code']!r}")
            mapping[cid] = row["rollup_code"]
    if problems:
        raise StoreError(problems)
    return mapping


def write_hierarchy(mapping: dict[str, str], path) -> None:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["concept_id", "rollup_code"])
        for cid in sorted(mapping):
            w.writerow([cid, mapping[cid]])


# -- summary statistics ----------------------------------------------------------


@dataclass(frozen=True)
class DistSummary:
    mean: float
    std: float
    minimum: float
    q25: float
    median: float
    q75: float
    maximum: float


def _summarize(values) -> DistSummary:
    import numpy as np

    arr = np.asarray(values, dtype=np.float64)
    return DistSummary(
        mean=float(arr.mean()),
        std=float(arr.std(ddof=0)),
        minimum=float(arr.min()),
        q25=float(np.percentile(arr, 25)),
        median=float(np.percentile(arr, 50)),
        q75=float(np.percentile(arr, 75)),
        maximum=float(arr.max()),
    )


@dataclass(frozen=True)
class StoreSummary:
    n_persons: int
    n_visits: int
    n_events: int
    visits_per_person: DistSummary
    events_per_person: DistSummary


def summary_stats(store: EventStore) -> StoreSummary:
    """Per-person visit and record count distributions."""
    if store.n_persons == 0:
        raise StoreError(["summary of an empty store"])
    visit_counts = [len(store.visits_of(pid)) for pid in store.person_ids]
    event_counts = [len(store.events_of_person(pid)) for pid in store.person_ids]
    return StoreSummary(
        n_persons=store.n_persons,
        n_visits=store.n_visits,
        n_events=store.n_events,
        visits_per_person=_summarize(visit_counts),
        events_per_person=_summarize(event_counts),
    )
