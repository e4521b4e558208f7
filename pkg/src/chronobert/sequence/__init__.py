from .vocab import (
    FIRST_CONCEPT_ID,
    FIRST_REAL_TYPE_ID,
    INTERVAL_TOKENS,
    LONG_TERM_TOKEN,
    MASK_ID,
    MASK_TOKEN,
    PAD_ID,
    PAD_TOKEN,
    RESERVED_TOKENS,
    SEP_ID,
    SEP_TOKEN,
    TYPE_MASK_ID,
    TYPE_NONE_ID,
    UNK_ID,
    UNK_TOKEN,
    VE_ID,
    VE_TOKEN,
    VS_ID,
    VS_TOKEN,
    VisitTypeVocabulary,
    Vocabulary,
)
from .builder import (
    DAYS_PER_YEAR,
    EPOCH,
    FINETUNE_WINDOW,
    PRETRAIN_WINDOW,
    RepresentationVariant,
    TokenSequence,
    build_from_timeline,
    build_sequence,
    export_sequences_jsonl,
    interval_token,
    window,
)
from .masking import apply_token_mask, apply_visit_type_mask, maskable_positions

__all__ = [
    "DAYS_PER_YEAR",
    "EPOCH",
    "FINETUNE_WINDOW",
    "FIRST_CONCEPT_ID",
    "FIRST_REAL_TYPE_ID",
    "INTERVAL_TOKENS",
    "LONG_TERM_TOKEN",
    "MASK_ID",
    "MASK_TOKEN",
    "PAD_ID",
    "PAD_TOKEN",
    "PRETRAIN_WINDOW",
    "RESERVED_TOKENS",
    "RepresentationVariant",
    "SEP_ID",
    "SEP_TOKEN",
    "TYPE_MASK_ID",
    "TYPE_NONE_ID",
    "TokenSequence",
    "UNK_ID",
    "UNK_TOKEN",
    "VE_ID",
    "VE_TOKEN",
    "VS_ID",
    "VS_TOKEN",
    "VisitTypeVocabulary",
    "Vocabulary",
    "apply_token_mask",
    "apply_visit_type_mask",
    "build_from_timeline",
    "build_sequence",
    "export_sequences_jsonl",
    "interval_token",
    "maskable_positions",
    "window",
]
