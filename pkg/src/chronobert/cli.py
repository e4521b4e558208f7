"""Command-line entry point: one binary, one subcommand per pipeline stage.

Every subcommand reads an optional TOML config (``--config``), applies an
optional ``--budget`` preset and then its own flags (flag > budget > file >
default), writes all outputs under ``--out`` with fixed filenames, and drops
a ``resolved.toml`` snapshot sufficient to reproduce the run. Failures exit
with code 2 and a single ``error: ...`` line on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict, replace
from pathlib import Path

from .cohort import load_shipped_definition, shipped_tasks
from .data import (
    emit_store,
    generate_synthetic,
    load_hierarchy,
    load_store,
    summary_stats,
    synthetic_hierarchy,
    write_hierarchy,
)
from .errors import ChronobertError, ConfigError
from .eval import (
    ablation_matrix,
    att_coordinates,
    cohort_examples,
    example_sequences,
    make_folds,
    run_ablation,
    run_baselines,
    run_experiment,
    sequence_length_rows,
    write_att_pca_csv,
    write_lengths_csv,
    write_metrics_csv,
    write_report_md,
)
from .model import OutcomeClassifier
from .runconfig import (
    BUDGET_NAMES,
    RESOLVED_NAME,
    RunConfig,
    apply_budget,
    load_run_config,
    write_resolved,
)

WEIGHTS_NAME = "weights.cehrw"
VOCAB_NAME = "vocab.csv"
TYPE_VOCAB_NAME = "visit_types.csv"


# -- config resolution ---------------------------------------------------------


def _resolve(args) -> RunConfig:
    config = load_run_config(args.config) if args.config else RunConfig()
    if getattr(args, "budget", None):
        config = apply_budget(config, args.budget)
    if getattr(args, "seed", None) is not None:
        config = replace(config, seed=args.seed)
    if getattr(args, "out", None) is not None:
        config = replace(config, out=args.out)
    if getattr(args, "jobs", None) is not None:
        config = replace(config, jobs=args.jobs)
    if getattr(args, "variant", None):
        config = replace(config, model=replace(config.model, variant=args.variant))
    if getattr(args, "tasks", None):
        config = replace(config, harness=replace(config.harness, tasks=tuple(args.tasks)))
    if getattr(args, "fraction", None) is not None:
        config = replace(config,
                         harness=replace(config.harness, fractions=(args.fraction,)))
    if config.out is None:
        raise ConfigError(["an output directory is required: pass --out or set out="])
    return config


def _out_dir(config: RunConfig) -> Path:
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_store(config: RunConfig):
    store_dir = config.store_dir()
    if not store_dir.exists():
        raise ConfigError([f"store directory does not exist: {store_dir}"])
    return load_store(store_dir)


def _definitions(config: RunConfig):
    return [load_shipped_definition(task) for task in config.harness.tasks]


def _load_checkpoint(command: str, checkpoint):
    if checkpoint is None:
        raise ConfigError(
            [f"{command} requires --checkpoint pointing at a pretrain output directory"])
    directory = Path(checkpoint)
    needed = [directory / RESOLVED_NAME, directory / WEIGHTS_NAME,
              directory / VOCAB_NAME, directory / TYPE_VOCAB_NAME]
    missing = [str(p) for p in needed if not p.exists()]
    if missing:
        raise ConfigError([f"checkpoint is missing {p}" for p in missing])
    saved = load_run_config(needed[0])
    pretrainer = saved.pretrainer()
    pretrainer.load_fitted(*needed[1:])
    return saved, pretrainer


def _hierarchy(config: RunConfig) -> dict:
    if config.data.hierarchy is None:
        return {}
    path = Path(config.data.hierarchy)
    if not path.exists():
        raise ConfigError([f"hierarchy file does not exist: {path}"])
    return load_hierarchy(path)


# -- subcommands -----------------------------------------------------------------


def cmd_synth(args) -> int:
    config = _resolve(args)
    out = _out_dir(config)
    store = generate_synthetic(config.synth, config.seed)
    emit_store(store, out / "store")
    write_hierarchy(synthetic_hierarchy(config.synth), out / "hierarchy.csv")
    write_resolved(config, out)
    print(f"wrote {store.n_persons} persons, {store.n_visits} visits, "
          f"{store.n_events} events to {out / 'store'}")
    return 0


def cmd_stats(args) -> int:
    config = _resolve(args)
    out = _out_dir(config)
    summary = summary_stats(_load_store(config))
    (out / "stats.json").write_text(
        json.dumps(asdict(summary), indent=2, sort_keys=True) + "\n")
    write_resolved(config, out)
    print(f"{summary.n_persons} persons, {summary.n_visits} visits, "
          f"{summary.n_events} events; stats.json written")
    return 0


def cmd_pretrain(args) -> int:
    config = _resolve(args)
    out = _out_dir(config)
    store = _load_store(config)
    pretrainer = config.pretrainer().fit(store)
    pretrainer.save(out / WEIGHTS_NAME, out / VOCAB_NAME, out / TYPE_VOCAB_NAME)
    trace_path = out / "pretrain_loss.csv"
    with open(trace_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["step", "epoch", "lr", "mlm_loss", "vtp_loss", "total_loss"])
        for row in pretrainer.loss_trace_:
            writer.writerow([row["step"], row["epoch"], repr(row["lr"]),
                             repr(row["mlm_loss"]), repr(row["vtp_loss"]),
                             repr(row["total_loss"])])
    write_resolved(config, out)
    final = pretrainer.loss_trace_[-1]["total_loss"] if pretrainer.loss_trace_ else float("nan")
    print(f"pretrained {config.model.variant} on {len(pretrainer.person_ids_)} patients; "
          f"final loss {final:.4f}; checkpoint in {out}")
    return 0


def cmd_finetune(args) -> int:
    config = _resolve(args)
    out = _out_dir(config)
    saved, pretrainer = _load_checkpoint("finetune", args.checkpoint)
    store = _load_store(config)
    definition = load_shipped_definition(config.harness.tasks[0])
    examples, labels = cohort_examples(store, definition)
    plan = make_folds(labels, config.seed)
    fold = plan.folds[0]
    sequences = example_sequences(store, examples, saved.model.variant,
                                  pretrainer.vocab_, pretrainer.type_vocab_)
    classifier = OutcomeClassifier(
        pretrainer, epochs=config.finetune.epochs, batch_size=config.finetune.batch_size,
        lr=config.finetune.lr, patience=config.finetune.patience, seed=config.seed)
    classifier.fit([sequences[i] for i in fold.train], labels[list(fold.train)],
                   [sequences[i] for i in fold.val], labels[list(fold.val)])
    classifier.weights_.save(out / "finetuned.cehrw")
    with open(out / "finetune_loss.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epoch", "train_loss", "val_loss"])
        for row in classifier.loss_trace_:
            writer.writerow([row["epoch"], repr(row["train_loss"]), repr(row["val_loss"])])
    write_resolved(config, out)
    print(f"fine-tuned on {definition.name} fold 0 "
          f"({len(classifier.loss_trace_)} epochs, best val loss "
          f"{classifier.best_val_loss_:.4f}); weights in {out}")
    return 0


def cmd_evaluate(args) -> int:
    config = _resolve(args)
    out = _out_dir(config)
    saved, pretrainer = _load_checkpoint("evaluate", args.checkpoint)
    store = _load_store(config)
    settings = config.settings()
    reports = []
    for definition in _definitions(config):
        _, labels = cohort_examples(store, definition)
        plan = make_folds(labels, config.seed)
        reports.append(run_experiment(store, definition, saved.model_spec(), settings,
                                      config.seed, pretrainer=pretrainer, plan=plan))
        if config.harness.baselines:
            reports.extend(run_baselines(store, definition, settings, config.seed,
                                         plan=plan, hierarchy=_hierarchy(config),
                                         l2=config.harness.l2))
    write_metrics_csv(reports, out / "metrics.csv")
    write_report_md(reports, out / "report.md")
    write_resolved(config, out)
    print(f"evaluated {len(reports)} model/task cells; metrics.csv and report.md in {out}")
    return 0


def cmd_fewshot(args) -> int:
    config = _resolve(args)
    out = _out_dir(config)
    saved, pretrainer = _load_checkpoint("fewshot", args.checkpoint)
    store = _load_store(config)
    settings = config.settings()
    reports = []
    for definition in _definitions(config):
        _, labels = cohort_examples(store, definition)
        plan = make_folds(labels, config.seed)
        for fraction in config.harness.fractions:
            reports.append(run_experiment(store, definition, saved.model_spec(),
                                          settings, config.seed, fraction=fraction,
                                          pretrainer=pretrainer, plan=plan))
    write_metrics_csv(reports, out / "metrics.csv")
    write_report_md(reports, out / "report.md", title="Few-shot evaluation")
    write_resolved(config, out)
    print(f"few-shot sweep over {len(reports)} cells; metrics.csv in {out}")
    return 0


def cmd_ablate(args) -> int:
    config = _resolve(args)
    out = _out_dir(config)
    store = _load_store(config)
    reports = run_ablation(store, _definitions(config), config.settings(), config.seed)
    write_metrics_csv(reports, out / "metrics.csv")
    write_report_md(reports, out / "report.md", title="Component ablation")
    write_resolved(config, out)
    print(f"ablation over {len(reports)} cells; report.md in {out}")
    return 0


def cmd_viz_att(args) -> int:
    config = _resolve(args)
    out = _out_dir(config)
    _, pretrainer = _load_checkpoint("viz-att", args.checkpoint)
    write_att_pca_csv(att_coordinates(pretrainer), out / "att_pca.csv")
    write_resolved(config, out)
    print(f"att_pca.csv written to {out}")
    return 0


def cmd_lengths(args) -> int:
    config = _resolve(args)
    out = _out_dir(config)
    store = _load_store(config)
    rows = sequence_length_rows(store, _definitions(config))
    write_lengths_csv(rows, out / "lengths.csv")
    write_resolved(config, out)
    print(f"sequence lengths for {len(rows)} task/variant cells; lengths.csv in {out}")
    return 0


def cmd_params(args) -> int:
    config = _resolve(args)
    out = _out_dir(config)
    if args.checkpoint:
        _, pretrainer = _load_checkpoint("params", args.checkpoint)
    else:
        pretrainer = config.pretrainer().prepare(_load_store(config))
    groups: dict[str, int] = {}
    total = 0
    for name, tensor in pretrainer.weights_.tensors.items():
        group = name.split(".")[0]
        groups[group] = groups.get(group, 0) + tensor.data.size
        total += tensor.data.size
    lines = [f"{group},{count}" for group, count in sorted(groups.items())]
    (out / "params.csv").write_text("component,parameters\n" + "\n".join(lines)
                                    + f"\ntotal,{total}\n")
    write_resolved(config, out)
    print(f"{total} parameters across {len(groups)} component groups; params.csv in {out}")
    return 0


# -- parser ----------------------------------------------------------------------


def _add_common(parser: argparse.ArgumentParser, *, jobs=False, variant=False,
                tasks=False, fraction=False, checkpoint=False) -> None:
    parser.add_argument("--config", metavar="TOML", default=None,
                        help="run configuration file (default: built-in defaults)")
    parser.add_argument("--out", metavar="DIR", default=None,
                        help="output directory (default: taken from config)")
    parser.add_argument("--seed", type=int, default=None,
                        help="master random seed (default: from config, 0)")
    parser.add_argument("--budget", choices=BUDGET_NAMES, default=None,
                        help="size/runtime preset applied over the config file")
    if jobs:
        parser.add_argument("--jobs", type=int, default=None,
                            help="parallel worker processes (default: 1)")
    if variant:
        parser.add_argument("--variant", default=None,
                            help="sequence representation (default: cehr)")
    if tasks:
        parser.add_argument("--task", "--tasks", dest="tasks", action="append",
                            default=None, metavar="TASK",
                            help="prediction task, repeatable "
                                 f"(shipped: {', '.join(shipped_tasks())})")
    if fraction:
        parser.add_argument("--fraction", type=float, default=None,
                            help="single training fraction (default: config sweep)")
    if checkpoint:
        parser.add_argument("--checkpoint", metavar="DIR", default=None,
                            help="pretrain output directory to load weights from")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chronobert",
        description="Time-aware BERT-style representation learning for "
                    "clinical event sequences.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    spec = [
        ("synth", cmd_synth, "generate a synthetic event store", {}),
        ("stats", cmd_stats, "summarize an event store", {}),
        ("pretrain", cmd_pretrain, "pretrain on unlabeled visit history",
         {"variant": True}),
        ("finetune", cmd_finetune, "fine-tune a checkpoint on one task fold",
         {"tasks": True, "checkpoint": True}),
        ("evaluate", cmd_evaluate, "score a checkpoint and baselines over folds",
         {"tasks": True, "checkpoint": True, "jobs": True}),
        ("fewshot", cmd_fewshot, "training-fraction sweep of a checkpoint",
         {"tasks": True, "checkpoint": True, "fraction": True, "jobs": True}),
        ("ablate", cmd_ablate, "pretrain and score every model variant",
         {"tasks": True, "jobs": True}),
        ("viz-att", cmd_viz_att, "project interval-token embeddings to 2d",
         {"checkpoint": True}),
        ("lengths", cmd_lengths, "sequence-length summary per task and variant",
         {"tasks": True}),
        ("params", cmd_params, "parameter-count breakdown of the model",
         {"checkpoint": True}),
    ]
    for name, fn, help_text, extra in spec:
        p = sub.add_parser(name, help=help_text, description=help_text,
                           formatter_class=argparse.ArgumentDefaultsHelpFormatter)
        _add_common(p, **extra)
        p.set_defaults(fn=fn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ChronobertError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
