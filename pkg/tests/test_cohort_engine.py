"""Cohort engine window semantics, labeling, and frequency features."""

from datetime import date, timedelta

import pytest

from chronobert.cohort import (
    CohortDefinition,
    CountRule,
    IndexRule,
    OutcomeRule,
    build_cohort,
    build_example,
    cohort_to_csv_bytes,
    design_matrix,
    example_timeline,
    feature_vocabulary,
    load_shipped_definition,
    rollup_counts,
    rollup_features,
    shipped_tasks,
)
from chronobert.data import (
    DomainEvent,
    EventStore,
    Person,
    SynthConfig,
    VisitRecord,
    generate_synthetic,
)
from chronobert.errors import ValidationError


def one_person_store(visit_specs):
    """Store with a single person; visit_specs = [(vtype, start, concepts), ...]."""
    persons = [Person("solo", date(1960, 1, 1), "female")]
    visits, events = [], []
    for i, (vtype, start, concepts) in enumerate(visit_specs):
        vid = f"solo-v{i}"
        visits.append(VisitRecord(vid, "solo", vtype, start, start, None))
        for concept in concepts:
            events.append(DomainEvent("solo", vid, "condition", concept, start))
    return EventStore(persons, visits, events)


def simple_definition(**overrides):
    base = dict(
        name="simple",
        index=IndexRule(kind="event", concepts=frozenset({"entry"})),
        outcome=OutcomeRule(kind="event", concepts=frozenset({"bad"})),
        observation_days=100,
        prediction_days=50,
    )
    base.update(overrides)
    return CohortDefinition(**base)


class TestIndexSelection:
    def test_first_qualifying_candidate_wins(self):
        store = one_person_store([
            ("office", date(2015, 1, 1), ["entry"]),
            ("office", date(2015, 6, 1), ["entry"]),
        ])
        example = build_example(store, "solo", simple_definition())
        assert example.index_date == date(2015, 1, 1)

    def test_failed_candidate_falls_through_to_next(self):
        # needs one "prep" concept on or before the index
        rule = CountRule(name="prepped", window="lookback",
                         concepts=frozenset({"prep"}), min_count=1)
        store = one_person_store([
            ("office", date(2015, 1, 1), ["entry"]),
            ("office", date(2015, 3, 1), ["prep"]),
            ("office", date(2015, 6, 1), ["entry"]),
        ])
        example = build_example(store, "solo", simple_definition(inclusions=(rule,)))
        assert example.index_date == date(2015, 6, 1)

    def test_no_candidate_returns_none(self):
        store = one_person_store([("office", date(2015, 1, 1), ["other"])])
        assert build_example(store, "solo", simple_definition()) is None

    def test_before_window_is_strict(self):
        """History dated exactly on the index day does not exclude."""
        rule = CountRule(name="clean_history", window="before",
                         concepts=frozenset({"stain"}), max_count=0)
        store = one_person_store([("office", date(2015, 1, 1), ["entry", "stain"])])
        example = build_example(store, "solo", simple_definition(inclusions=(rule,)))
        assert example is not None

    def test_lookback_includes_index_day(self):
        rule = CountRule(name="same_day_ok", window="lookback",
                         concepts=frozenset({"prep"}), min_count=1)
        store = one_person_store([("office", date(2015, 1, 1), ["entry", "prep"])])
        example = build_example(store, "solo", simple_definition(inclusions=(rule,)))
        assert example is not None


class TestLabeling:
    def test_outcome_on_index_day_is_negative(self):
        store = one_person_store([("office", date(2015, 1, 1), ["entry", "bad"])])
        assert build_example(store, "solo", simple_definition()).label == 0

    def test_outcome_day_after_index_is_positive(self):
        store = one_person_store([
            ("office", date(2015, 1, 1), ["entry"]),
            ("office", date(2015, 1, 2), ["bad"]),
        ])
        assert build_example(store, "solo", simple_definition()).label == 1

    def test_prediction_window_end_is_inclusive(self):
        store = one_person_store([
            ("office", date(2015, 1, 1), ["entry"]),
            ("office", date(2015, 1, 1) + timedelta(days=50), ["bad"]),
        ])
        assert build_example(store, "solo", simple_definition()).label == 1

    def test_outcome_past_prediction_window(self):
        store = one_person_store([
            ("office", date(2015, 1, 1), ["entry"]),
            ("office", date(2015, 1, 1) + timedelta(days=51), ["bad"]),
        ])
        assert build_example(store, "solo", simple_definition()).label == 0

    def test_unbounded_prediction_window(self):
        store = one_person_store([
            ("office", date(2015, 1, 1), ["entry"]),
            ("office", date(2024, 1, 1), ["bad"]),
        ])
        definition = simple_definition(prediction_days=None)
        assert build_example(store, "solo", definition).label == 1


class TestFeatureWindows:
    def test_retrospective_bounds(self):
        store = one_person_store([
            ("office", date(2014, 9, 1), ["deep_past"]),    # 122 days before
            ("office", date(2014, 10, 1), ["in_window"]),   # 92 days before
            ("office", date(2015, 1, 1), ["entry"]),
            ("office", date(2015, 2, 1), ["future"]),
        ])
        example = build_example(store, "solo", simple_definition())
        concepts = {e.concept_id for e in example.feature_events}
        assert concepts == {"in_window", "entry"}
        assert example.feature_start == date(2015, 1, 1) - timedelta(days=100)
        assert example.feature_end == date(2015, 1, 1)

    def test_hold_off_trims_recent_events(self):
        store = one_person_store([
            ("office", date(2014, 10, 1), ["old"]),
            ("office", date(2014, 12, 25), ["recent"]),
            ("office", date(2015, 1, 1), ["entry"]),
        ])
        definition = simple_definition(hold_off_days=10)
        concepts = {e.concept_id
                    for e in build_example(store, "solo", definition).feature_events}
        assert concepts == {"old"}

    def test_unbounded_observation_reaches_data_start(self):
        store = one_person_store([
            ("office", date(1995, 1, 1), ["ancient"]),
            ("office", date(2015, 1, 1), ["entry"]),
        ])
        definition = simple_definition(observation_days=None)
        example = build_example(store, "solo", definition)
        assert example.feature_start is None
        assert {e.concept_id for e in example.feature_events} == {"ancient", "entry"}

    def test_prospective_window_follows_index(self):
        definition = simple_definition(
            layout="prospective",
            index=IndexRule(kind="first_visit", anchor="start"),
            observation_days=100, hold_off_days=30, prediction_days=50)
        store = one_person_store([
            ("office", date(2015, 1, 1), ["a"]),
            ("office", date(2015, 3, 1), ["b"]),      # day 59, observed
            ("office", date(2015, 5, 1), ["c"]),      # day 120, hold-off dead zone
            ("office", date(2015, 6, 1), ["bad"]),    # day 151, outcome window
        ])
        example = build_example(store, "solo", definition)
        assert {e.concept_id for e in example.feature_events} == {"a", "b"}
        assert example.label == 1
        assert example.feature_start == date(2015, 1, 1)


class TestBuildCohort:
    def test_empty_store_rejected(self):
        store = EventStore([], [], [])
        with pytest.raises(ValidationError, match="empty store"):
            build_cohort(store, simple_definition())

    def test_examples_in_person_order(self):
        store = generate_synthetic(SynthConfig(n_patients=40, outcome_signal=True), seed=3)
        examples = build_cohort(store, load_shipped_definition("gap_signal"))
        ids = [e.person_id for e in examples]
        assert ids == sorted(ids)

    def test_same_seed_same_cohort(self):
        definition = load_shipped_definition("hospitalization")
        cohorts = []
        for _ in range(2):
            store = generate_synthetic(SynthConfig(n_patients=60), seed=11)
            examples = build_cohort(store, definition)
            cohorts.append([(e.person_id, e.index_date, e.label) for e in examples])
        assert cohorts[0] == cohorts[1]

    def test_csv_export(self):
        store = one_person_store([
            ("office", date(2015, 1, 1), ["entry"]),
            ("office", date(2015, 1, 10), ["bad"]),
        ])
        blob = cohort_to_csv_bytes(build_cohort(store, simple_definition()))
        assert blob.decode().splitlines() == [
            "person_id,index_date,label", "solo,2015-01-01,1"]


class TestBruteForceAgreement:
    """Labels and windows re-derived by flat scans over every record."""

    def brute_label(self, store, definition, person_id, index):
        lo = index
        if definition.layout == "prospective":
            lo = index + timedelta(days=definition.observation_days
                                   + definition.hold_off_days)
        hi = None if definition.prediction_days is None \
            else lo + timedelta(days=definition.prediction_days)
        rule = definition.outcome
        dates = []
        if rule.kind == "event":
            for event in store.events_of_person(person_id):
                if event.concept_id in rule.concepts:
                    dates.append(event.event_date)
        else:
            for visit in store.visits_of(person_id):
                if rule.visit_types and visit.visit_type not in rule.visit_types:
                    continue
                if rule.discharge_to and visit.discharge_to not in rule.discharge_to:
                    continue
                dates.append(visit.start_date if rule.anchor == "start" else visit.end_date)
        return int(any(d > lo and (hi is None or d <= hi) for d in dates))

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_labels_match_flat_scan(self, seed):
        store = generate_synthetic(
            SynthConfig(n_patients=50, outcome_signal=True, mean_visits=6.0), seed=seed)
        for task in shipped_tasks():
            definition = load_shipped_definition(task)
            for example in build_cohort(store, definition):
                expected = self.brute_label(store, definition, example.person_id,
                                            example.index_date)
                assert example.label == expected, (task, example.person_id)

    def test_feature_events_respect_window_bounds(self):
        store = generate_synthetic(
            SynthConfig(n_patients=50, outcome_signal=True), seed=5)
        for task in shipped_tasks():
            definition = load_shipped_definition(task)
            for example in build_cohort(store, definition):
                for event in example.feature_events:
                    assert event.event_date <= example.feature_end
                    if example.feature_start is not None:
                        assert event.event_date >= example.feature_start
                person_events = store.events_of_person(example.person_id)
                in_window = [e for e in person_events
                             if (example.feature_start is None
                                 or e.event_date >= example.feature_start)
                             and e.event_date <= example.feature_end]
                assert list(example.feature_events) == in_window


class TestTimeline:
    def test_groups_events_under_visits_in_order(self):
        store = one_person_store([
            ("office", date(2014, 11, 1), ["x", "y"]),
            ("office", date(2014, 12, 1), []),
            ("office", date(2015, 1, 1), ["entry"]),
        ])
        example = build_example(store, "solo", simple_definition())
        timeline = example_timeline(store, example)
        assert [v.start_date for v, _ in timeline] == [date(2014, 11, 1), date(2015, 1, 1)]
        assert [len(events) for _, events in timeline] == [2, 1]

    def test_eventless_visits_are_dropped(self):
        store = one_person_store([
            ("office", date(2015, 1, 1), ["entry"]),
            ("office", date(2015, 1, 20), []),
        ])
        example = build_example(store, "solo", simple_definition())
        assert len(example_timeline(store, example)) == 1


class TestRollupFeatures:
    def example_with(self, concepts, day=date(2015, 1, 1)):
        events = tuple(DomainEvent("solo", "solo-v0", "condition", c, day)
                       for c in concepts)
        from chronobert.cohort import LabeledExample
        return LabeledExample("solo", day, 0, events, None, day)

    def test_mapped_concepts_are_grouped(self):
        example = self.example_with(["a", "a", "b"])
        assert rollup_counts(example, {"a": "A"}) == {"A": 2, "b": 1}

    def test_empty_window_gives_empty_vector(self):
        example = self.example_with([])
        assert rollup_counts(example, {}) == {}
        x, y, names = design_matrix([example], {})
        assert x.shape == (1, 0) and names == []

    def test_mixed_mapped_and_verbatim_counts(self):
        # three mapped concepts collapse into two groups; two pass verbatim
        example = self.example_with(["c_1", "c_2", "c_3", "raw_a", "raw_b", "c_1"])
        hierarchy = {"c_1": "grp_x", "c_2": "grp_x", "c_3": "grp_y"}
        assert rollup_counts(example, hierarchy) == {
            "grp_x": 3, "grp_y": 1, "raw_a": 1, "raw_b": 1}

    def test_vector_aligned_to_vocabulary(self):
        example = self.example_with(["a", "b", "b"])
        names = feature_vocabulary([example], {})
        assert names == ["a", "b"]
        assert rollup_features(example, {}, names).tolist() == [1.0, 2.0]
        assert rollup_features(example, {}, ["ghost", "a"]).tolist() == [0.0, 1.0]

    def test_design_matrix_shapes(self):
        examples = [self.example_with(["a"]), self.example_with(["b", "b"])]
        x, y, names = design_matrix(examples, {})
        assert x.shape == (2, 2)
        assert x.tolist() == [[1.0, 0.0], [0.0, 2.0]]
        assert y.tolist() == [0.0, 0.0]
