"""Random forest classifier built on the CART kernels.

Each tree fits a bootstrap resample; each node samples ``mtry`` candidate
columns (default floor(sqrt(p))) and takes the best Gini-decrease split.
Per-tree seeds derive from the master seed and the tree index alone, so the
forest is reproducible independent of thread count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from ._trees import grow_forest, predict_forest
from .errors import ColumnMismatch, DegenerateLabels, NonFinite
from .features import FeatureMatrix
from .params import ForestParams

_UNLIMITED_DEPTH = 2**31


@dataclass(frozen=True)
class ForestFit:
    n_trees: int
    mtry: int
    min_leaf: int
    max_depth: int
    seed: int
    columns: tuple[str, ...]
    features: np.ndarray      # (n_trees, max_nodes) split column, -1 for leaf
    thresholds: np.ndarray
    lefts: np.ndarray
    rights: np.ndarray
    npos: np.ndarray          # bootstrap class counts per node
    nneg: np.ndarray
    node_counts: np.ndarray
    importance: np.ndarray    # mean impurity decrease per column


def _as_dense(X) -> tuple[np.ndarray, tuple[str, ...]]:
    if isinstance(X, FeatureMatrix):
        columns = X.columns
        mat = X.dense()
    else:
        mat = np.asarray(X.todense()) if sparse.issparse(X) else np.asarray(X, dtype=np.float64)
        columns = tuple(f"x{j}" for j in range(mat.shape[1]))
    mat = np.asfortranarray(mat, dtype=np.float64)
    if not np.all(np.isfinite(mat)):
        raise NonFinite("design matrix contains non-finite values")
    return mat, columns


def tree_seeds(master_seed: int, n_trees: int) -> np.ndarray:
    """Per-tree seed depends only on (master seed, tree index)."""
    return np.array(
        [np.random.SeedSequence([master_seed, t]).generate_state(1, dtype=np.uint64)[0]
         for t in range(n_trees)], dtype=np.uint64)


def fit_forest(X, y, params: ForestParams | None = None, seed: int = 0) -> ForestFit:
    params = params or ForestParams()
    params.validate()
    mat, columns = _as_dense(X)
    labels = np.asarray(y, dtype=np.int64)
    if labels.min() == labels.max():
        raise DegenerateLabels("labels are constant; nothing to classify")
    n, p = mat.shape
    mtry = params.mtry if params.mtry is not None else max(1, int(np.sqrt(p)))
    mtry = min(mtry, p)
    max_depth = params.max_depth if params.max_depth > 0 else _UNLIMITED_DEPTH
    max_nodes = 2 * n + 1

    seeds = tree_seeds(seed, params.n_trees)
    features = np.full((params.n_trees, max_nodes), -1, dtype=np.int64)
    thresholds = np.zeros((params.n_trees, max_nodes))
    lefts = np.zeros((params.n_trees, max_nodes), dtype=np.int64)
    rights = np.zeros((params.n_trees, max_nodes), dtype=np.int64)
    npos = np.zeros((params.n_trees, max_nodes))
    nneg = np.zeros((params.n_trees, max_nodes))
    node_counts = np.zeros(params.n_trees, dtype=np.int64)
    importances = np.zeros((params.n_trees, p))
    grow_forest(mat, labels, seeds, mtry, max_depth, params.min_leaf,
                features, thresholds, lefts, rights, npos, nneg,
                node_counts, importances)
    used = int(node_counts.max())
    return ForestFit(n_trees=params.n_trees, mtry=mtry, min_leaf=params.min_leaf,
                     max_depth=params.max_depth, seed=seed, columns=columns,
                     features=features[:, :used].copy(),
                     thresholds=thresholds[:, :used].copy(),
                     lefts=lefts[:, :used].copy(),
                     rights=rights[:, :used].copy(),
                     npos=npos[:, :used].copy(),
                     nneg=nneg[:, :used].copy(),
                     node_counts=node_counts,
                     importance=importances.mean(axis=0))


def predict_proba_forest(fit: ForestFit, X) -> np.ndarray:
    """Mean over trees of the leaf's positive-class training proportion."""
    if isinstance(X, FeatureMatrix):
        if X.columns != fit.columns:
            raise ColumnMismatch("feature columns do not match the fitted forest")
        mat = np.ascontiguousarray(X.dense())
    else:
        mat = np.asarray(X.todense()) if sparse.issparse(X) else np.asarray(X, dtype=np.float64)
        if mat.shape[1] != len(fit.columns):
            raise ColumnMismatch(f"model has {len(fit.columns)} columns, "
                                 f"matrix has {mat.shape[1]}")
        mat = np.ascontiguousarray(mat, dtype=np.float64)
    out = np.empty(mat.shape[0])
    predict_forest(mat, fit.features, fit.thresholds, fit.lefts, fit.rights,
                   fit.npos, fit.nneg, out)
    return out


def forest_importance(fit: ForestFit, k: int) -> list[tuple[str, float]]:
    """Top-k columns by mean impurity decrease, ties by column name."""
    from .errors import BadConfig
    if k < 1:
        raise BadConfig(f"k must be >= 1, got {k}")
    ranked = sorted(zip(fit.columns, fit.importance.tolist()),
                    key=lambda t: (-t[1], t[0]))
    return [(name, float(v)) for name, v in ranked[:k]]
