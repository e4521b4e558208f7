"""Run configuration: one TOML file describing a whole pipeline run.

Precedence is flag > budget preset > file > built-in default. Unknown keys
are rejected with every violation listed, and each command writes the fully
resolved configuration back out as TOML so a run can be reproduced from its
output directory alone.
"""

from __future__ import annotations

import sys
from dataclasses import asdict, dataclass, field, fields, replace
from datetime import date
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .data import SynthConfig, config_from_dict
from .errors import ConfigError
from .eval.experiment import ABLATION_SPECS, ExperimentSettings, ModelSpec
from .eval.folds import DEFAULT_FRACTIONS
from .model import SequencePretrainer

RESOLVED_NAME = "resolved.toml"
BUDGET_NAMES = ("tiny", "small", "paper-doc")


@dataclass(frozen=True)
class DataSection:
    """Where input files live. ``store_dir`` defaults to ``<out>/store``."""

    store_dir: str | None = None
    hierarchy: str | None = None


@dataclass(frozen=True)
class ModelSection:
    variant: str = "cehr"
    embedding_mode: str = "concat_fc"
    vtp_enabled: bool = True
    vtp_loss_weight: float = 1.0
    vtp_self_attention: bool = True
    mask_artificial: bool = True
    n_layers: int = 5
    n_heads: int = 8
    d_model: int = 128
    d_ff: int = 512
    dropout: float = 0.1
    time2vec_dim: int = 16
    context_window: int = 300


@dataclass(frozen=True)
class PretrainSection:
    epochs: int = 5
    batch_size: int = 32
    lr: float = 2e-4
    eta_min: float = 0.0
    min_events: int = 6


@dataclass(frozen=True)
class FinetuneSection:
    epochs: int = 10
    batch_size: int = 32
    lr: float = 1e-4
    patience: int = 1


@dataclass(frozen=True)
class HarnessSection:
    tasks: tuple[str, ...] = ("gap_signal",)
    fractions: tuple[float, ...] = DEFAULT_FRACTIONS
    nested_few_shot: bool = True
    baselines: bool = True
    l2: float = 1.0


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    out: str | None = None
    jobs: int = 1
    data: DataSection = field(default_factory=DataSection)
    synth: SynthConfig = field(default_factory=SynthConfig)
    model: ModelSection = field(default_factory=ModelSection)
    pretrain: PretrainSection = field(default_factory=PretrainSection)
    finetune: FinetuneSection = field(default_factory=FinetuneSection)
    harness: HarnessSection = field(default_factory=HarnessSection)

    # -- derived views --------------------------------------------------------

    def settings(self) -> ExperimentSettings:
        return ExperimentSettings(
            n_layers=self.model.n_layers, n_heads=self.model.n_heads,
            d_model=self.model.d_model, d_ff=self.model.d_ff,
            dropout=self.model.dropout, time2vec_dim=self.model.time2vec_dim,
            context_window=self.model.context_window,
            pretrain_epochs=self.pretrain.epochs,
            finetune_epochs=self.finetune.epochs,
            batch_size=self.finetune.batch_size,
            pretrain_lr=self.pretrain.lr, finetune_lr=self.finetune.lr,
            patience=self.finetune.patience, min_events=self.pretrain.min_events,
            jobs=self.jobs)

    def model_spec(self) -> ModelSpec:
        """The configured model's grid cell, named like the matching variant."""
        for spec in ABLATION_SPECS:
            if (spec.variant == self.model.variant
                    and spec.embedding_mode == self.model.embedding_mode
                    and spec.vtp_enabled == self.model.vtp_enabled
                    and spec.pretrained):
                return spec
        return ModelSpec("custom", variant=self.model.variant,
                         embedding_mode=self.model.embedding_mode,
                         vtp_enabled=self.model.vtp_enabled)

    def pretrainer(self) -> SequencePretrainer:
        return SequencePretrainer(
            variant=self.model.variant, n_layers=self.model.n_layers,
            n_heads=self.model.n_heads, d_model=self.model.d_model,
            d_ff=self.model.d_ff, dropout=self.model.dropout,
            time2vec_dim=self.model.time2vec_dim,
            context_window=self.model.context_window,
            embedding_mode=self.model.embedding_mode,
            vtp_enabled=self.model.vtp_enabled,
            vtp_loss_weight=self.model.vtp_loss_weight,
            vtp_self_attention=self.model.vtp_self_attention,
            mask_artificial=self.model.mask_artificial,
            epochs=self.pretrain.epochs, batch_size=self.pretrain.batch_size,
            initial_lr=self.pretrain.lr, eta_min=self.pretrain.eta_min,
            min_events=self.pretrain.min_events, seed=self.seed)

    def store_dir(self) -> Path:
        if self.data.store_dir is not None:
            return Path(self.data.store_dir)
        if self.out is None:
            raise ConfigError(["no store directory: set [data].store_dir or --out"])
        return Path(self.out) / "store"


# named presets trading fidelity for runtime; applied between file and flags
BUDGETS: dict[str, dict] = {
    "tiny": {
        "synth": {"n_patients": 120},
        "model": {"n_layers": 1, "n_heads": 2, "d_model": 16, "d_ff": 32,
                  "time2vec_dim": 4, "context_window": 64},
        "pretrain": {"epochs": 1, "batch_size": 16},
        "finetune": {"epochs": 2, "batch_size": 16},
    },
    "small": {
        "synth": {"n_patients": 2000},
        "model": {"n_layers": 2, "n_heads": 8, "d_model": 64, "d_ff": 256,
                  "time2vec_dim": 16, "context_window": 96},
        "pretrain": {"epochs": 3, "batch_size": 32},
        "finetune": {"epochs": 10, "batch_size": 32},
    },
    "paper-doc": {
        "synth": {"n_patients": 2000},
        "model": {"n_layers": 5, "n_heads": 8, "d_model": 128, "d_ff": 512,
                  "time2vec_dim": 16, "context_window": 300},
        "pretrain": {"epochs": 5, "batch_size": 32},
        "finetune": {"epochs": 10, "batch_size": 32},
    },
}


# -- parsing -------------------------------------------------------------------


def _section(cls, data: dict, name: str, problems: list[str], convert=None):
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    problems.extend(f"unknown key {k!r} in [{name}]" for k in unknown)
    kept = {k: v for k, v in data.items() if k in known}
    if convert:
        kept = convert(kept)
    try:
        return cls(**kept)
    except TypeError as exc:
        problems.append(f"[{name}]: {exc}")
        return cls()


def _tuplify(keys):
    def convert(data: dict) -> dict:
        return {k: tuple(v) if k in keys and isinstance(v, list) else v
                for k, v in data.items()}
    return convert


def config_from_mapping(data: dict) -> RunConfig:
    """Build a RunConfig from TOML-shaped primitives, rejecting unknown keys."""
    problems: list[str] = []
    top_known = {"seed", "out", "jobs", "data", "synth", "model",
                 "pretrain", "finetune", "harness"}
    problems.extend(f"unknown top-level key {k!r}" for k in sorted(set(data) - top_known))

    sections = {}
    sections["data"] = _section(DataSection, data.get("data", {}), "data", problems)
    try:
        sections["synth"] = config_from_dict(data.get("synth", {}))
    except Exception as exc:
        problems.extend(getattr(exc, "problems", [str(exc)]))
        sections["synth"] = SynthConfig()
    sections["model"] = _section(ModelSection, data.get("model", {}), "model", problems)
    sections["pretrain"] = _section(PretrainSection, data.get("pretrain", {}),
                                    "pretrain", problems)
    sections["finetune"] = _section(FinetuneSection, data.get("finetune", {}),
                                    "finetune", problems)
    sections["harness"] = _section(HarnessSection, data.get("harness", {}), "harness",
                                   problems, convert=_tuplify({"tasks", "fractions"}))
    if problems:
        raise ConfigError(problems)
    return RunConfig(seed=int(data.get("seed", 0)), out=data.get("out"),
                     jobs=int(data.get("jobs", 1)), **sections)


def load_run_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError([f"config file does not exist: {path}"])
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError([f"invalid TOML in {path}: {exc}"]) from exc
    return config_from_mapping(data)


def apply_budget(config: RunConfig, budget: str) -> RunConfig:
    if budget not in BUDGETS:
        raise ConfigError(
            [f"unknown budget {budget!r}; choose one of {', '.join(BUDGET_NAMES)}"])
    preset = BUDGETS[budget]
    return replace(
        config,
        synth=replace(config.synth, **preset["synth"]),
        model=replace(config.model, **preset["model"]),
        pretrain=replace(config.pretrain, **preset["pretrain"]),
        finetune=replace(config.finetune, **preset["finetune"]))


# -- emitting -------------------------------------------------------------------


def _toml_scalar(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value)
    if isinstance(value, date):
        return value.isoformat()
    if isinstance(value, str):
        escaped = value.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_toml_scalar(v) for v in value) + "]"
    raise ConfigError([f"cannot serialize {type(value).__name__} to TOML"])


def _emit_table(name: str, table: dict, lines: list[str]) -> None:
    nested = {k: v for k, v in table.items() if isinstance(v, dict)}
    flat = {k: v for k, v in table.items() if not isinstance(v, dict)}
    if flat or not nested:
        lines.append(f"[{name}]")
        for key, value in flat.items():
            if value is not None:
                lines.append(f"{key} = {_toml_scalar(value)}")
        lines.append("")
    for key, sub in nested.items():
        _emit_table(f"{name}.{key}", sub, lines)


def resolved_toml(config: RunConfig) -> str:
    """The full effective configuration as a TOML document."""
    lines = [f"seed = {config.seed}"]
    if config.out is not None:
        lines.append(f"out = {_toml_scalar(config.out)}")
    lines.append(f"jobs = {config.jobs}")
    lines.append("")
    for name in ("data", "synth", "model", "pretrain", "finetune", "harness"):
        _emit_table(name, asdict(getattr(config, name)), lines)
    return "\n".join(lines).rstrip() + "\n"


def write_resolved(config: RunConfig, out_dir) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / RESOLVED_NAME
    path.write_text(resolved_toml(config))
    return path
