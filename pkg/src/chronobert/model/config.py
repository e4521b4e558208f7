"""Architecture configuration."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace

from ..errors import ConfigError

EMBEDDING_MODES = ("concat_fc", "sum", "none_positional")

# The fine-tuning head's recurrent width is fixed, not architecture-searched.
CLASSIFIER_HIDDEN = 64


@dataclass
class ModelConfig:
    vocab_size: int
    n_visit_types: int
    n_layers: int = 5
    n_heads: int = 8
    d_model: int = 128
    d_ff: int = 512
    dropout: float = 0.1
    time2vec_dim: int = 16
    context_window: int = 300
    embedding_mode: str = "concat_fc"
    vtp_enabled: bool = True
    vtp_loss_weight: float = 1.0
    vtp_self_attention: bool = True
    seed: int = 0

    def validate(self) -> None:
        problems = []
        if self.vocab_size < 23:
            problems.append("vocab_size must cover the reserved block plus at least one concept")
        if self.n_visit_types < 3:
            problems.append("n_visit_types must cover none/mask plus at least one real type")
        if self.n_layers < 1:
            problems.append("n_layers must be positive")
        if self.d_model < 1 or self.n_heads < 1:
            problems.append("d_model and n_heads must be positive")
        elif self.d_model % self.n_heads != 0:
            problems.append(f"d_model {self.d_model} not divisible by n_heads {self.n_heads}")
        if self.d_ff < 1:
            problems.append("d_ff must be positive")
        if not 0.0 <= self.dropout < 1.0:
            problems.append(f"dropout must be in [0, 1), got {self.dropout}")
        if self.time2vec_dim < 2 and self.embedding_mode != "none_positional":
            problems.append("time2vec_dim needs at least a linear plus one periodic component")
        if self.context_window < 2:
            problems.append("context_window must be at least 2")
        if self.embedding_mode not in EMBEDDING_MODES:
            problems.append(f"embedding_mode must be one of {EMBEDDING_MODES}, got {self.embedding_mode!r}")
        if self.embedding_mode == "none_positional" and self.d_model % 2 != 0:
            problems.append("positional encoding requires an even d_model")
        if self.vtp_loss_weight < 0:
            problems.append("vtp_loss_weight must be non-negative")
        if problems:
            raise ConfigError(problems)

    @property
    def head_dim(self) -> int:
        return self.d_model // self.n_heads

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError([f"unknown model option {k!r}" for k in unknown])
        missing = [k for k in ("vocab_size", "n_visit_types") if k not in data]
        if missing:
            raise ConfigError([f"model option {k!r} is required" for k in missing])
        config = cls(**data)
        config.validate()
        return config

    def with_data_dims(self, vocab_size: int, n_visit_types: int) -> "ModelConfig":
        return replace(self, vocab_size=vocab_size, n_visit_types=n_visit_types)
