from .store import (
    DEFAULT_VISIT_TYPES,
    DISCHARGE_DESTINATIONS,
    DOMAINS,
    GENDERS,
    DistSummary,
    DomainEvent,
    EventStore,
    Person,
    StoreSummary,
    VisitRecord,
    emit_store,
    load_hierarchy,
    load_store,
    store_to_csv_bytes,
    summary_stats,
    write_hierarchy,
)
from .synthetic import (
    GAP_SIGNAL_THRESHOLD_DAYS,
    INDEX_CONCEPT,
    OUTCOME_CONCEPT,
    SynthConfig,
    config_from_dict,
    generate_synthetic,
    synthetic_hierarchy,
)

__all__ = [
    "DEFAULT_VISIT_TYPES",
    "DISCHARGE_DESTINATIONS",
    "DOMAINS",
    "GAP_SIGNAL_THRESHOLD_DAYS",
    "GENDERS",
    "INDEX_CONCEPT",
    "OUTCOME_CONCEPT",
    "DistSummary",
    "DomainEvent",
    "EventStore",
    "Person",
    "StoreSummary",
    "SynthConfig",
    "VisitRecord",
    "config_from_dict",
    "emit_store",
    "generate_synthetic",
    "load_hierarchy",
    "load_store",
    "store_to_csv_bytes",
    "summary_stats",
    "synthetic_hierarchy",
    "write_hierarchy",
]
