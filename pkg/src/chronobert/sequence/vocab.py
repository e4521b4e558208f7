"""Token and visit-type vocabularies.

Token ids are frozen at the front: PAD=0, MASK=1, UNK=2, SEP=3, VS=4, VE=5,
then the interval tokens W0-W3, M1-M11, LT, then concept tokens sorted
lexicographically. Visit-type ids: 0 = none/pad, 1 = the reserved type mask,
then the store's types sorted.
"""

from __future__ import annotations

import csv
from pathlib import Path

from ..errors import ValidationError

PAD_TOKEN = "PAD"
MASK_TOKEN = "MASK"
UNK_TOKEN = "UNK"
SEP_TOKEN = "SEP"
VS_TOKEN = "VS"
VE_TOKEN = "VE"

WEEK_TOKENS = tuple(f"W{i}" for i in range(4))
MONTH_TOKENS = tuple(f"M{i}" for i in range(1, 12))
LONG_TERM_TOKEN = "LT"
INTERVAL_TOKENS = WEEK_TOKENS + MONTH_TOKENS + (LONG_TERM_TOKEN,)

RESERVED_TOKENS = (PAD_TOKEN, MASK_TOKEN, UNK_TOKEN, SEP_TOKEN, VS_TOKEN, VE_TOKEN) + INTERVAL_TOKENS

PAD_ID = 0
MASK_ID = 1
UNK_ID = 2
SEP_ID = 3
VS_ID = 4
VE_ID = 5
FIRST_CONCEPT_ID = len(RESERVED_TOKENS)

TYPE_NONE_ID = 0
TYPE_MASK_ID = 1
FIRST_REAL_TYPE_ID = 2


class Vocabulary:
    """Immutable token <-> id maps with the reserved block pinned up front."""

    def __init__(self, concept_tokens):
        concepts = sorted(set(concept_tokens))
        clashes = sorted(set(concepts) & set(RESERVED_TOKENS))
        if clashes:
            raise ValidationError([f"concept id collides with reserved token {c!r}" for c in clashes])
        self.id_to_token: tuple[str, ...] = RESERVED_TOKENS + tuple(concepts)
        self.token_to_id: dict[str, int] = {t: i for i, t in enumerate(self.id_to_token)}

    @classmethod
    def from_store(cls, store) -> "Vocabulary":
        return cls(store.concept_ids())

    def __len__(self) -> int:
        return len(self.id_to_token)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_id

    def id_of(self, token: str) -> int:
        """Exact lookup; KeyError for unknown tokens."""
        return self.token_to_id[token]

    def encode_concept(self, concept_id: str) -> int:
        """Concept lookup with UNK fallback."""
        return self.token_to_id.get(concept_id, UNK_ID)

    def token_of(self, token_id: int) -> str:
        return self.id_to_token[token_id]

    def is_artificial(self, token_id: int) -> bool:
        """True for structural tokens (SEP/VS/VE and interval tokens)."""
        return SEP_ID <= token_id < FIRST_CONCEPT_ID

    def interval_token_ids(self) -> list[int]:
        return [self.token_to_id[t] for t in INTERVAL_TOKENS]

    def save(self, path) -> None:
        path = Path(path)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["token", "id"])
            for i, token in enumerate(self.id_to_token):
                w.writerow([token, i])

    @classmethod
    def load(cls, path) -> "Vocabulary":
        path = Path(path)
        rows: list[tuple[str, int]] = []
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or tuple(reader.fieldnames) != ("token", "id"):
                raise ValidationError([f"{path.name}: header must be token,id"])
            for row in reader:
                rows.append((row["token"], int(row["id"])))
        rows.sort(key=lambda r: r[1])
        tokens = tuple(t for t, _ in rows)
        ids = tuple(i for _, i in rows)
        if ids != tuple(range(len(rows))):
            raise ValidationError([f"{path.name}: ids must be a dense 0..n-1 range"])
        if tokens[:FIRST_CONCEPT_ID] != RESERVED_TOKENS:
            raise ValidationError([f"{path.name}: reserved token block is wrong or out of order"])
        return cls(tokens[FIRST_CONCEPT_ID:])

    def __eq__(self, other) -> bool:
        if not isinstance(other, Vocabulary):
            return NotImplemented
        return self.id_to_token == other.id_to_token


class VisitTypeVocabulary:
    """Visit-type ids: 0 none/pad, 1 reserved mask, then types sorted."""

    def __init__(self, visit_types):
        self.types: tuple[str, ...] = tuple(sorted(set(visit_types)))
        self._ids = {t: FIRST_REAL_TYPE_ID + i for i, t in enumerate(self.types)}

    @classmethod
    def from_store(cls, store) -> "VisitTypeVocabulary":
        return cls(store.visit_types)

    def __len__(self) -> int:
        """Number of assignable ids, reserved slots included."""
        return FIRST_REAL_TYPE_ID + len(self.types)

    def id_of(self, visit_type: str) -> int:
        if visit_type not in self._ids:
            raise KeyError(f"unknown visit type {visit_type!r}")
        return self._ids[visit_type]

    def type_of(self, type_id: int) -> str:
        if type_id < FIRST_REAL_TYPE_ID:
            return ("<none>", "<type-mask>")[type_id]
        return self.types[type_id - FIRST_REAL_TYPE_ID]

    def save(self, path) -> None:
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["type", "id"])
            for t in self.types:
                w.writerow([t, self._ids[t]])

    @classmethod
    def load(cls, path) -> "VisitTypeVocabulary":
        with open(Path(path), newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or tuple(reader.fieldnames) != ("type", "id"):
                raise ValidationError([f"{Path(path).name}: header must be type,id"])
            rows = [(row["type"], int(row["id"])) for row in reader]
        vocab = cls([t for t, _ in rows])
        expected = [(t, vocab.id_of(t)) for t, _ in sorted(rows, key=lambda r: r[1])]
        if sorted(rows, key=lambda r: r[1]) != expected:
            raise ValidationError([f"{Path(path).name}: ids do not match canonical assignment"])
        return vocab

    def __eq__(self, other) -> bool:
        if not isinstance(other, VisitTypeVocabulary):
            return NotImplemented
        return self.types == other.types
