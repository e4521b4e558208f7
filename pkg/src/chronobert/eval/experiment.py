"""Experiment orchestration: pretrain once, fine-tune per fold, compare variants.

A :class:`ModelSpec` pins the four axes an ablation can move (sequence
representation, embedding combination, second objective, pretraining), and
``run_experiment`` measures one spec on one prediction task over a shared
fold plan, so every model variant and baseline is scored on byte-identical
splits. Folds are independent jobs; ``jobs > 1`` fans them out across
processes over snapshotted weights.
"""

from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass, field

import numpy as np

from ..baselines import BiLstmClassifier, LogisticFrequencyModel
from ..cohort import build_cohort, design_matrix, example_timeline
from ..errors import ValidationError
from ..model import ModelWeights, OutcomeClassifier, SequencePretrainer
from ..rng import derive_rng
from ..sequence import (
    VE_ID,
    VS_ID,
    RepresentationVariant,
    TokenSequence,
    VisitTypeVocabulary,
    Vocabulary,
    build_from_timeline,
)
from .folds import Fold, FoldPlan, few_shot_plan, make_folds
from .metrics import mean_std, pr_auc, roc_auc
from .pca import pca_2d

LR_MODEL = "LR"
BILSTM_MODEL = "Bi-LSTM"


@dataclass(frozen=True)
class ModelSpec:
    """One cell of the model grid: how to build and pretrain the network."""

    name: str
    variant: str = RepresentationVariant.CEHR.value
    embedding_mode: str = "concat_fc"
    vtp_enabled: bool = True
    pretrained: bool = True


ABLATION_SPECS = (
    ModelSpec("M-BERT", variant=RepresentationVariant.MEDBERT_STYLE.value),
    ModelSpec("B-BERT", variant=RepresentationVariant.BEHRT_STYLE.value),
    ModelSpec("NS-BERT", vtp_enabled=False),
    ModelSpec("NT-BERT", embedding_mode="none_positional"),
    ModelSpec("ALT-BERT", embedding_mode="sum"),
    ModelSpec("V-BERT", variant=RepresentationVariant.NO_VS_VE.value),
    ModelSpec("CEHR-BERT"),
    ModelSpec("R-BERT", pretrained=False),
)


def ablation_matrix() -> tuple[ModelSpec, ...]:
    """The model variants of the component ablation, in fixed report order."""
    return ABLATION_SPECS


@dataclass(frozen=True)
class ExperimentSettings:
    """Network size and training budget shared by every cell of a comparison."""

    n_layers: int = 5
    n_heads: int = 8
    d_model: int = 128
    d_ff: int = 512
    dropout: float = 0.1
    time2vec_dim: int = 16
    context_window: int = 300
    pretrain_epochs: int = 5
    finetune_epochs: int = 10
    batch_size: int = 32
    pretrain_lr: float = 2e-4
    finetune_lr: float = 1e-4
    patience: int = 1
    min_events: int = 6
    jobs: int = 1


@dataclass(frozen=True)
class MetricReport:
    """Per-fold and aggregated scores for one (task, model, fraction) cell."""

    task: str
    model: str
    fraction: float
    fold_aucs: tuple[float, ...]
    fold_pr_aucs: tuple[float, ...]
    fold_digests: tuple[str, ...] = field(default=())

    def auc_summary(self) -> tuple[float, float]:
        return mean_std(self.fold_aucs)

    def pr_auc_summary(self) -> tuple[float, float]:
        return mean_std(self.fold_pr_aucs)


# -- pretraining --------------------------------------------------------------


def build_pretrainer(spec: ModelSpec, settings: ExperimentSettings,
                     seed: int) -> SequencePretrainer:
    return SequencePretrainer(
        variant=spec.variant, n_layers=settings.n_layers, n_heads=settings.n_heads,
        d_model=settings.d_model, d_ff=settings.d_ff, dropout=settings.dropout,
        time2vec_dim=settings.time2vec_dim, context_window=settings.context_window,
        embedding_mode=spec.embedding_mode, vtp_enabled=spec.vtp_enabled,
        epochs=settings.pretrain_epochs, batch_size=settings.batch_size,
        initial_lr=settings.pretrain_lr, min_events=settings.min_events, seed=seed)


def pretrain_model(store, spec: ModelSpec, settings: ExperimentSettings,
                   seed: int) -> SequencePretrainer:
    """Fit (or, for unpretrained controls, merely initialize) one variant."""
    pretrainer = build_pretrainer(spec, settings, seed)
    if spec.pretrained:
        pretrainer.fit(store)
    else:
        pretrainer.prepare(store)
    return pretrainer


def _export_pretrained(pretrainer: SequencePretrainer) -> dict:
    """Plain-array form of the fitted state, safe to ship across processes."""
    return {"params": pretrainer.get_params(), "config": pretrainer.config_,
            "vocab": pretrainer.vocab_, "type_vocab": pretrainer.type_vocab_,
            "arrays": pretrainer.weights_.snapshot()}


def _restore_pretrained(state: dict) -> SequencePretrainer:
    pretrainer = SequencePretrainer(**state["params"])
    pretrainer.config_ = state["config"]
    pretrainer.vocab_ = state["vocab"]
    pretrainer.type_vocab_ = state["type_vocab"]
    pretrainer.weights_ = ModelWeights(state["config"], state["arrays"])
    pretrainer.person_ids_ = []
    pretrainer.loss_trace_ = []
    return pretrainer


# -- cohort material ----------------------------------------------------------


def cohort_examples(store, definition, observation_override=None):
    """Labeled examples with at least one feature event, plus the label vector.

    Examples whose feature window is empty cannot be tokenized, so they are
    excluded up front — before fold construction — keeping every model and
    baseline on exactly the same example list.
    """
    examples = [ex for ex in build_cohort(store, definition, observation_override)
                if ex.n_events > 0]
    if not examples:
        raise ValidationError([f"cohort {definition.name!r} has no usable examples"])
    labels = np.array([ex.label for ex in examples], dtype=np.int64)
    return examples, labels


def example_sequences(store, examples, variant, vocab, type_vocab) -> list[TokenSequence]:
    """Tokenize each example's feature window with a shared vocabulary."""
    sequences = []
    for ex in examples:
        person = store.person(ex.person_id)
        timeline = example_timeline(store, ex)
        sequences.append(build_from_timeline(
            timeline, person.birth_date, RepresentationVariant(variant),
            vocab, type_vocab, person_id=ex.person_id))
    return sequences


def _fold_seed(seed: int, fold_index: int) -> int:
    return int(derive_rng(seed, "finetune-fold", str(fold_index)).integers(1 << 31))


def _train_subset(fold: Fold, labels, fraction: float, seed: int) -> tuple[int, ...]:
    if fraction >= 1.0:
        return fold.train
    plan = few_shot_plan(fold, labels, seed, fractions=(fraction,))
    return plan[fraction]


# -- fold workers -------------------------------------------------------------


def _score_network_fold(state, sequences, labels, fold, subset, settings, seed):
    pretrainer = _restore_pretrained(state)
    classifier = OutcomeClassifier(
        pretrainer, epochs=settings.finetune_epochs, batch_size=settings.batch_size,
        lr=settings.finetune_lr, patience=settings.patience, seed=seed)
    classifier.fit([sequences[i] for i in subset], labels[list(subset)],
                   [sequences[i] for i in fold.val], labels[list(fold.val)])
    scores = classifier.decision_scores([sequences[i] for i in fold.test])
    test_labels = labels[list(fold.test)]
    return roc_auc(scores, test_labels), pr_auc(scores, test_labels)


def _score_lr_fold(features, labels, fold, subset, l2):
    # no validation loss to monitor, so train and validation merge
    rows = list(subset) + list(fold.val)
    model = LogisticFrequencyModel(l2=l2).fit(features[rows], labels[rows])
    scores = model.decision_scores(features[list(fold.test)])
    test_labels = labels[list(fold.test)]
    return roc_auc(scores, test_labels), pr_auc(scores, test_labels)


def _score_bilstm_fold(sequences, labels, fold, subset, settings, seed, vocab_size):
    model = BiLstmClassifier(
        context_window=settings.context_window, epochs=settings.finetune_epochs,
        batch_size=settings.batch_size, lr=settings.finetune_lr,
        patience=settings.patience, seed=seed)
    model.fit([sequences[i] for i in subset], labels[list(subset)],
              [sequences[i] for i in fold.val], labels[list(fold.val)],
              vocab_size=vocab_size)
    scores = model.decision_scores([sequences[i] for i in fold.test])
    test_labels = labels[list(fold.test)]
    return roc_auc(scores, test_labels), pr_auc(scores, test_labels)


def _map_folds(worker, per_fold_args, jobs: int) -> list[tuple[float, float]]:
    if jobs <= 1:
        return [worker(*args) for args in per_fold_args]
    with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(worker, *zip(*per_fold_args)))


# -- experiments --------------------------------------------------------------


def run_experiment(store, definition, spec: ModelSpec, settings: ExperimentSettings,
                   seed: int, fraction: float = 1.0,
                   pretrainer: SequencePretrainer | None = None,
                   plan: FoldPlan | None = None) -> MetricReport:
    """Score one model spec on one task across a stratified fold plan.

    Fine-tuning runs at most ``settings.finetune_epochs`` epochs per fold and
    stops early on stalled validation loss; metrics come from the held-out
    test split. ``fraction`` < 1 subsamples the training set the same way the
    few-shot sweep does, leaving validation and test untouched.
    """
    examples, labels = cohort_examples(store, definition)
    if plan is None:
        plan = make_folds(labels, seed)
    if pretrainer is None:
        pretrainer = pretrain_model(store, spec, settings, seed)
    sequences = example_sequences(store, examples, spec.variant,
                                  pretrainer.vocab_, pretrainer.type_vocab_)
    state = _export_pretrained(pretrainer)
    per_fold = [(state, sequences, labels, fold,
                 _train_subset(fold, labels, fraction, seed),
                 settings, _fold_seed(seed, k))
                for k, fold in enumerate(plan)]
    pairs = _map_folds(_score_network_fold, per_fold, settings.jobs)
    return MetricReport(
        task=definition.name, model=spec.name, fraction=fraction,
        fold_aucs=tuple(auc for auc, _ in pairs),
        fold_pr_aucs=tuple(pr for _, pr in pairs),
        fold_digests=tuple(fold.digest() for fold in plan))


def run_baselines(store, definition, settings: ExperimentSettings, seed: int,
                  fraction: float = 1.0, plan: FoldPlan | None = None,
                  hierarchy: dict | None = None, l2: float = 1.0) -> list[MetricReport]:
    """Score the frequency and recurrent baselines on the same splits.

    The logistic model sees rolled-up concept counts over the whole-cohort
    feature vocabulary; the recurrent baseline sees concepts-only token
    sequences. Both consume the same examples and fold plan as the network.
    """
    examples, labels = cohort_examples(store, definition)
    if plan is None:
        plan = make_folds(labels, seed)
    digests = tuple(fold.digest() for fold in plan)

    features, _, _ = design_matrix(examples, hierarchy or {})
    lr_args = [(features, labels, fold, _train_subset(fold, labels, fraction, seed), l2)
               for fold in plan]
    lr_pairs = _map_folds(_score_lr_fold, lr_args, settings.jobs)

    vocab = Vocabulary(store.concept_ids())
    type_vocab = VisitTypeVocabulary(sorted({v.visit_type for v in store.all_visits()}))
    sequences = example_sequences(store, examples,
                                  RepresentationVariant.MEDBERT_STYLE.value,
                                  vocab, type_vocab)
    lstm_args = [(sequences, labels, fold, _train_subset(fold, labels, fraction, seed),
                  settings, _fold_seed(seed, k), len(vocab))
                 for k, fold in enumerate(plan)]
    lstm_pairs = _map_folds(_score_bilstm_fold, lstm_args, settings.jobs)

    return [
        MetricReport(task=definition.name, model=LR_MODEL, fraction=fraction,
                     fold_aucs=tuple(a for a, _ in lr_pairs),
                     fold_pr_aucs=tuple(p for _, p in lr_pairs),
                     fold_digests=digests),
        MetricReport(task=definition.name, model=BILSTM_MODEL, fraction=fraction,
                     fold_aucs=tuple(a for a, _ in lstm_pairs),
                     fold_pr_aucs=tuple(p for _, p in lstm_pairs),
                     fold_digests=digests),
    ]


def run_few_shot(store, definition, spec: ModelSpec, settings: ExperimentSettings,
                 seed: int, fractions) -> list[MetricReport]:
    """One report per training fraction, on a single shared fold plan."""
    examples, labels = cohort_examples(store, definition)
    plan = make_folds(labels, seed)
    pretrainer = pretrain_model(store, spec, settings, seed)
    return [run_experiment(store, definition, spec, settings, seed,
                           fraction=fraction, pretrainer=pretrainer, plan=plan)
            for fraction in fractions]


def run_ablation(store, definitions, settings: ExperimentSettings, seed: int,
                 specs=ABLATION_SPECS) -> list[MetricReport]:
    """The full variant grid over one or more tasks, task-major ordering.

    Pretraining is task-independent, so each spec pretrains once and its
    weights are reused for every task.
    """
    specs = tuple(specs)
    if settings.jobs > 1 and len(specs) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=settings.jobs) as pool:
            states = list(pool.map(_pretrain_state_job,
                                   [(store, spec, settings, seed) for spec in specs]))
        pretrainers = {spec.name: _restore_pretrained(state)
                       for spec, state in zip(specs, states)}
    else:
        pretrainers = {spec.name: pretrain_model(store, spec, settings, seed)
                       for spec in specs}

    reports = []
    for definition in definitions:
        _, labels = cohort_examples(store, definition)
        plan = make_folds(labels, seed)
        for spec in specs:
            reports.append(run_experiment(store, definition, spec, settings, seed,
                                          pretrainer=pretrainers[spec.name], plan=plan))
    return reports


def _pretrain_state_job(args):
    store, spec, settings, seed = args
    return _export_pretrained(pretrain_model(store, spec, settings, seed))


# -- descriptive outputs ------------------------------------------------------


def att_coordinates(pretrainer: SequencePretrainer) -> list[tuple[str, float, float]]:
    """2-d projection of the learned interval-token and bracket embeddings."""
    vocab = pretrainer.vocab_
    ids = [VS_ID, VE_ID] + vocab.interval_token_ids()
    names = [vocab.token_of(i) for i in ids]
    table = pretrainer.weights_["concept_emb"].data[ids].astype(np.float64)
    coords, _, _ = pca_2d(table)
    return [(name, float(x), float(y)) for name, (x, y) in zip(names, coords)]


def sequence_length_rows(store, definitions, variants=None) -> list[dict]:
    """Median and 95th-percentile token counts per task per representation."""
    if variants is None:
        variants = [v.value for v in RepresentationVariant]
    vocab = Vocabulary(store.concept_ids())
    type_vocab = VisitTypeVocabulary(sorted({v.visit_type for v in store.all_visits()}))
    rows = []
    for definition in definitions:
        examples, _ = cohort_examples(store, definition)
        for variant in variants:
            lengths = [len(seq) for seq in
                       example_sequences(store, examples, variant, vocab, type_vocab)]
            rows.append({"task": definition.name, "variant": str(variant),
                         "median": float(np.percentile(lengths, 50)),
                         "p95": float(np.percentile(lengths, 95))})
    return rows
