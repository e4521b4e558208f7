"""Declarative prediction-task definitions loaded from TOML files.

A definition names an index rule (who enters the cohort, and when), a list of
count-bounded inclusion rules, an outcome rule, and the window geometry. Two
layouts exist: ``retrospective`` (features before the index date, outcome
after) and ``prospective`` (features start at the index date; the outcome
window opens after the observation and hold-off spans).
"""

from __future__ import annotations

import csv
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..errors import ConfigError

LAYOUTS = ("retrospective", "prospective")
INDEX_KINDS = ("event", "visit", "first_visit")
OUTCOME_KINDS = ("event", "visit")
RULE_WINDOWS = ("before", "lookback", "observation")
VISIT_ANCHORS = ("start", "end")


@dataclass(frozen=True)
class IndexRule:
    """Which occurrence makes a person enter the cohort, and its anchor date.

    ``event``: any event whose concept is in ``concepts`` (anchored at the
    event date). ``visit``: any visit matching ``visit_types`` and/or
    ``discharge_to``, optionally required to contain an event from
    ``concepts``, anchored at its start or end. ``first_visit``: the earliest
    visit on record, anchored at its start.
    """

    kind: str
    concepts: frozenset[str] = frozenset()
    visit_types: tuple[str, ...] = ()
    discharge_to: tuple[str, ...] = ()
    anchor: str = "end"


@dataclass(frozen=True)
class OutcomeRule:
    kind: str
    concepts: frozenset[str] = frozenset()
    visit_types: tuple[str, ...] = ()
    discharge_to: tuple[str, ...] = ()
    anchor: str = "start"


@dataclass(frozen=True)
class CountRule:
    """``min_count <= matches-in-window <= max_count``; exclusions use max 0."""

    name: str
    window: str
    concepts: frozenset[str] | None = None  # None counts visits instead
    min_count: int = 0
    max_count: int | None = None


@dataclass(frozen=True)
class CohortDefinition:
    name: str
    index: IndexRule
    outcome: OutcomeRule
    inclusions: tuple[CountRule, ...] = ()
    layout: str = "retrospective"
    observation_days: int | None = None  # None = unbounded lookback
    hold_off_days: int = 0
    prediction_days: int | None = None  # None = unbounded

    def validate(self) -> None:
        problems = []
        if not self.name:
            problems.append("cohort name must be non-empty")
        if self.layout not in LAYOUTS:
            problems.append(f"layout must be one of {LAYOUTS}, got {self.layout!r}")
        if self.layout == "prospective" and self.observation_days is None:
            problems.append("prospective layout requires a bounded observation window")
        for label, value in (("observation_days", self.observation_days),
                             ("prediction_days", self.prediction_days)):
            if value is not None and value < 1:
                problems.append(f"{label} must be positive when bounded")
        if self.hold_off_days < 0:
            problems.append("hold_off_days must be non-negative")
        problems += self._index_problems()
        problems += self._outcome_problems()
        for rule in self.inclusions:
            problems += self._rule_problems(rule)
        if problems:
            raise ConfigError(problems)

    def _index_problems(self) -> list[str]:
        rule = self.index
        problems = []
        if rule.kind not in INDEX_KINDS:
            problems.append(f"index kind must be one of {INDEX_KINDS}, got {rule.kind!r}")
            return problems
        if rule.kind == "event" and not rule.concepts:
            problems.append("event-kind index rule needs a concept set")
        if rule.kind == "visit" and not (rule.visit_types or rule.discharge_to or rule.concepts):
            problems.append("visit-kind index rule needs visit_types, discharge_to, or containing concepts")
        if rule.anchor not in VISIT_ANCHORS:
            problems.append(f"index anchor must be one of {VISIT_ANCHORS}, got {rule.anchor!r}")
        return problems

    def _outcome_problems(self) -> list[str]:
        rule = self.outcome
        problems = []
        if rule.kind not in OUTCOME_KINDS:
            problems.append(f"outcome kind must be one of {OUTCOME_KINDS}, got {rule.kind!r}")
            return problems
        if rule.kind == "event" and not rule.concepts:
            problems.append("event-kind outcome rule needs a concept set")
        if rule.kind == "visit" and not (rule.visit_types or rule.discharge_to):
            problems.append("visit-kind outcome rule needs visit_types or discharge_to")
        if rule.anchor not in VISIT_ANCHORS:
            problems.append(f"outcome anchor must be one of {VISIT_ANCHORS}, got {rule.anchor!r}")
        return problems

    def _rule_problems(self, rule: CountRule) -> list[str]:
        problems = []
        where = f"inclusion rule {rule.name!r}"
        if rule.window not in RULE_WINDOWS:
            problems.append(f"{where}: window must be one of {RULE_WINDOWS}, got {rule.window!r}")
        if rule.concepts is not None and not rule.concepts:
            problems.append(f"{where}: concept set is empty")
        if rule.min_count < 0:
            problems.append(f"{where}: min_count must be non-negative")
        if rule.max_count is not None and rule.max_count < rule.min_count:
            problems.append(f"{where}: max_count below min_count")
        if rule.min_count == 0 and rule.max_count is None:
            problems.append(f"{where}: no-op rule (no bounds)")
        if rule.window == "observation" and self.observation_days is None \
                and self.layout == "prospective":
            problems.append(f"{where}: observation window is unbounded")
        return problems

    def with_observation_days(self, days: int) -> "CohortDefinition":
        """The sensitivity-analysis override: same task, shorter feature window."""
        if days < 1:
            raise ConfigError(["observation override must be positive"])
        return replace(self, observation_days=days)


def load_concept_set(path) -> frozenset[str]:
    """One concept id per row under a ``concept_id`` header."""
    path = Path(path)
    if not path.exists():
        raise ConfigError([f"concept set file not found: {path}"])
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["concept_id"]:
            raise ConfigError([f"{path}: expected header 'concept_id', got {header}"])
        concepts = [row[0].strip() for row in reader if row and row[0].strip()]
    if not concepts:
        raise ConfigError([f"{path}: concept set is empty"])
    return frozenset(concepts)


def _take(table: dict, known: dict[str, object], context: str, problems: list[str]) -> dict:
    unknown = sorted(set(table) - set(known))
    problems += [f"{context}: unknown key {k!r}" for k in unknown]
    out = dict(known)
    out.update({k: v for k, v in table.items() if k in known})
    return out


def _window_days(value, label: str, problems: list[str]):
    if value == "unbounded" or value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, int):
        problems.append(f"{label} must be an integer day count or 'unbounded'")
        return None
    return value


def definition_from_dict(data: dict, base_dir) -> CohortDefinition:
    """Assemble and validate a definition from TOML-shaped primitives.

    Concept-set values name CSV files relative to ``base_dir``; every
    problem is collected so a bad file reports all its mistakes at once.
    """
    problems: list[str] = []
    top = _take(data, {
        "name": "", "layout": "retrospective", "observation_days": None,
        "hold_off_days": 0, "prediction_days": None, "index": {}, "outcome": {},
        "inclusion": [], "concept_sets": {},
    }, "definition", problems)

    sets: dict[str, frozenset[str]] = {}
    for set_name, rel_path in dict(top["concept_sets"]).items():
        try:
            sets[set_name] = load_concept_set(Path(base_dir) / rel_path)
        except ConfigError as exc:
            problems += exc.problems

    def resolve(set_name, context) -> frozenset[str]:
        if set_name is None:
            return frozenset()
        if set_name not in sets:
            problems.append(f"{context}: unknown concept set {set_name!r}")
            return frozenset()
        return sets[set_name]

    index_raw = _take(dict(top["index"]), {
        "kind": "", "concepts": None, "visit_types": [], "discharge_to": [],
        "anchor": "end",
    }, "index", problems)
    index = IndexRule(kind=index_raw["kind"],
                      concepts=resolve(index_raw["concepts"], "index"),
                      visit_types=tuple(index_raw["visit_types"]),
                      discharge_to=tuple(index_raw["discharge_to"]),
                      anchor=index_raw["anchor"])

    outcome_raw = _take(dict(top["outcome"]), {
        "kind": "", "concepts": None, "visit_types": [], "discharge_to": [],
        "anchor": "start",
    }, "outcome", problems)
    outcome = OutcomeRule(kind=outcome_raw["kind"],
                          concepts=resolve(outcome_raw["concepts"], "outcome"),
                          visit_types=tuple(outcome_raw["visit_types"]),
                          discharge_to=tuple(outcome_raw["discharge_to"]),
                          anchor=outcome_raw["anchor"])

    inclusions = []
    for i, raw in enumerate(top["inclusion"]):
        rule_raw = _take(dict(raw), {
            "name": f"rule_{i}", "window": "", "concepts": None, "count": None,
            "min_count": 0, "max_count": None,
        }, f"inclusion[{i}]", problems)
        if rule_raw["count"] not in (None, "visits"):
            problems.append(f"inclusion[{i}]: count must be 'visits' when present")
        if (rule_raw["count"] == "visits") == (rule_raw["concepts"] is not None):
            problems.append(f"inclusion[{i}]: give either a concept set or count='visits'")
        concepts = None if rule_raw["count"] == "visits" \
            else resolve(rule_raw["concepts"], f"inclusion[{i}]")
        inclusions.append(CountRule(name=rule_raw["name"], window=rule_raw["window"],
                                    concepts=concepts, min_count=rule_raw["min_count"],
                                    max_count=rule_raw["max_count"]))

    definition = CohortDefinition(
        name=top["name"], index=index, outcome=outcome, inclusions=tuple(inclusions),
        layout=top["layout"],
        observation_days=_window_days(top["observation_days"], "observation_days", problems),
        hold_off_days=top["hold_off_days"],
        prediction_days=_window_days(top["prediction_days"], "prediction_days", problems))
    if problems:
        raise ConfigError(problems)
    definition.validate()
    return definition


def load_definition(path) -> CohortDefinition:
    path = Path(path)
    if not path.exists():
        raise ConfigError([f"cohort definition not found: {path}"])
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    return definition_from_dict(data, path.parent)


def packaged_definition_dir() -> Path:
    """Directory holding the definitions shipped inside the package."""
    return Path(__file__).resolve().parent.parent / "cohorts"


def shipped_tasks() -> list[str]:
    return sorted(p.stem for p in packaged_definition_dir().glob("*.toml"))


def load_shipped_definition(task: str) -> CohortDefinition:
    path = packaged_definition_dir() / f"{task}.toml"
    if not path.exists():
        raise ConfigError([f"unknown task {task!r}; shipped tasks: {shipped_tasks()}"])
    return load_definition(path)
