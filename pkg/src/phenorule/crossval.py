"""Cross-validation harness with fold-local featurization.

Every fold refits the vocabulary, IDF weights, and feature schema on its
training patients only, so no statistic of a held-out patient ever reaches
the model that scores them. Out-of-fold predictions are pooled into a single
PredictionSet per model spec, which is the unit all evaluation runs on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import features as feats
from . import text as textmod
from .errors import BadConfig, FitError, TooFewPatients
from .folds import stratified_fold_indices, unstratified_fold_indices
from .forest import fit_forest, predict_proba_forest
from .ingest import CohortDataset
from .lasso import lasso_path_select, predict_proba_lasso
from .metrics import PredictionSet
from .params import Hyperparams

FEATURE_SETS = ("structured", "notes", "combined")
ALGORITHMS = ("lasso", "forest")


@dataclass(frozen=True)
class ModelSpec:
    feature_set: str  # structured | notes | combined
    algorithm: str    # lasso | forest

    def __post_init__(self):
        if self.feature_set not in FEATURE_SETS:
            raise BadConfig(f"unknown feature set {self.feature_set!r}")
        if self.algorithm not in ALGORITHMS:
            raise BadConfig(f"unknown algorithm {self.algorithm!r}")

    @property
    def tag(self) -> str:
        return f"{self.feature_set}:{self.algorithm}"

    @classmethod
    def parse(cls, tag: str) -> "ModelSpec":
        parts = tag.split(":")
        if len(parts) != 2:
            raise BadConfig(f"model spec must look like 'notes:lasso', got {tag!r}")
        return cls(parts[0], parts[1])


ALL_SPECS = tuple(ModelSpec(f, a) for f in FEATURE_SETS for a in ALGORITHMS)


@dataclass(frozen=True)
class CvPlan:
    k: int
    fold_of: dict[str, int]
    stratified: bool
    seed: int

    def fold_sizes(self) -> list[int]:
        sizes = [0] * self.k
        for fold in self.fold_of.values():
            sizes[fold] += 1
        return sizes


def make_folds(dataset: CohortDataset, k: int, seed: int,
               stratified: bool = True) -> CvPlan:
    """Deterministic (optionally label-stratified) partition of the cohort."""
    pids = dataset.patient_ids
    n = len(pids)
    if k < 2:
        raise BadConfig(f"fold count must be >= 2, got {k}")
    if k > n:
        raise TooFewPatients(f"cannot make {k} folds from {n} patients")
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    if stratified:
        y = np.array(dataset.label_vector(), dtype=np.int64)
        assignment = stratified_fold_indices(y, k, rng)
    else:
        assignment = unstratified_fold_indices(n, k, rng)
    return CvPlan(k=k, fold_of={pid: int(f) for pid, f in zip(pids, assignment)},
                  stratified=stratified, seed=seed)


def patient_tokens(dataset: CohortDataset) -> dict[str, list[str]]:
    """Stemmed token list per patient; tokenization is deterministic per
    patient so it is computed once and shared across folds."""
    return {pid: textmod.concat_notes(dataset.notes_by_patient[pid])
            for pid in dataset.patient_ids}


def _spec_seed(seed: int, spec: ModelSpec, fold: int) -> int:
    code = FEATURE_SETS.index(spec.feature_set) * len(ALGORITHMS) + \
        ALGORITHMS.index(spec.algorithm)
    return int(np.random.SeedSequence([seed, code, fold]).generate_state(1)[0])


def build_features(train_records, test_records, train_tokens, test_tokens,
                   spec: ModelSpec, min_count: int,
                   exclude_outcome_features: bool, smooth_idf: bool = True):
    """Fit featurization on the training side only; returns (X_train, X_test, artifacts)."""
    artifacts: dict = {}
    train_fm = test_fm = None
    if spec.feature_set in ("structured", "combined"):
        schema = feats.fit_schema(train_records, not exclude_outcome_features)
        train_fm = feats.encode(schema, train_records)
        test_fm = feats.encode(schema, test_records)
        artifacts["schema"] = schema
    if spec.feature_set in ("notes", "combined"):
        vocab = textmod.fit_vocabulary(list(train_tokens.values()), min_count)
        tfidf = textmod.fit_tfidf(list(train_tokens.values()), vocab, smooth=smooth_idf)
        train_ids = list(train_tokens.keys())
        test_ids = list(test_tokens.keys())
        train_dtm = textmod.transform(tfidf, [train_tokens[p] for p in train_ids],
                                      row_ids=train_ids)
        test_dtm = textmod.transform(tfidf, [test_tokens[p] for p in test_ids],
                                     row_ids=test_ids)
        artifacts["tfidf"] = tfidf
        if spec.feature_set == "notes":
            train_fm = feats.from_doc_term(train_dtm)
            test_fm = feats.from_doc_term(test_dtm)
        else:
            train_fm = feats.combine(train_fm, train_dtm)
            test_fm = feats.combine(test_fm, test_dtm)
    return train_fm, test_fm, artifacts


def fit_and_predict(spec: ModelSpec, X_train, y_train, X_test,
                    hyper: Hyperparams, seed: int):
    """Fit one model and score held-out rows; returns (scores, fit)."""
    if spec.algorithm == "lasso":
        _, fit = lasso_path_select(X_train, y_train,
                                   inner_folds=hyper.lasso.inner_folds,
                                   seed=seed, params=hyper.lasso)
        return predict_proba_lasso(fit, X_test), fit
    fit = fit_forest(X_train, y_train, hyper.forest, seed=seed)
    return predict_proba_forest(fit, X_test), fit


def cross_validate(dataset: CohortDataset, spec: ModelSpec,
                   hyper: Hyperparams | None = None,
                   plan: CvPlan | None = None, *,
                   min_count: int = 50,
                   exclude_outcome_features: bool = False,
                   tokens: dict[str, list[str]] | None = None) -> PredictionSet:
    """Pool out-of-fold predictions for one model spec under the plan."""
    hyper = hyper or Hyperparams()
    hyper.validate()
    if plan is None:
        plan = make_folds(dataset, 10, hyper.seed)
    labels = dataset.labels
    if labels is None:
        raise TooFewPatients("cross-validation needs a labeled cohort")
    if tokens is None and spec.feature_set in ("notes", "combined"):
        tokens = patient_tokens(dataset)

    pids = dataset.patient_ids
    y_by_pid = {pid: int(labels[pid]) for pid in pids}
    records_by_pid = {r.patient_id: r for r in dataset.records}

    out_ids: list[str] = []
    out_true: list[int] = []
    out_score: list[float] = []
    out_fold: list[int] = []
    for fold in range(plan.k):
        train_ids = [p for p in pids if plan.fold_of[p] != fold]
        test_ids = [p for p in pids if plan.fold_of[p] == fold]
        if not test_ids:
            continue
        train_records = [records_by_pid[p] for p in train_ids]
        test_records = [records_by_pid[p] for p in test_ids]
        train_tokens = {p: tokens[p] for p in train_ids} if tokens else {}
        test_tokens = {p: tokens[p] for p in test_ids} if tokens else {}
        try:
            X_train, X_test, _ = build_features(
                train_records, test_records, train_tokens, test_tokens,
                spec, min_count, exclude_outcome_features)
            y_train = np.array([y_by_pid[p] for p in train_ids])
            scores, _ = fit_and_predict(spec, X_train, y_train, X_test,
                                        hyper, _spec_seed(hyper.seed, spec, fold))
        except FitError as exc:
            raise type(exc)(f"[spec {spec.tag}, fold {fold}] {exc}") from exc
        out_ids.extend(test_ids)
        out_true.extend(y_by_pid[p] for p in test_ids)
        out_score.extend(float(s) for s in scores)
        out_fold.extend([fold] * len(test_ids))
    return PredictionSet(patient_ids=tuple(out_ids),
                         y_true=np.array(out_true),
                         y_score=np.array(out_score),
                         fold_index=np.array(out_fold),
                         model_tag=spec.tag)
