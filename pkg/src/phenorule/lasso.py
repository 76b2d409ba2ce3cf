"""L1-penalized logistic regression with coefficient inspection.

Minimizes ``(1/n) * sum(log-loss) + lambda * ||beta||_1`` (intercept
unpenalized) by cyclic coordinate descent on the IRLS quadratic
majorization. Soft-thresholding produces exact zeros, so eliminated columns
carry coefficient 0.0, not merely a small value.

Penalty strength is chosen by inner stratified cross-validation maximizing
out-of-fold AUROC over a descending log grid from the analytic
``lambda_max`` (the smallest penalty that zeroes every coefficient), with
ties broken toward the sparser (larger-penalty) model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from ._cd import fit_logistic_lasso_path
from .errors import BadConfig, ColumnMismatch, DegenerateLabels, NonFinite
from .features import FeatureMatrix
from .folds import stratified_fold_indices
from .metrics import auroc
from .params import LassoParams


@dataclass(frozen=True)
class LassoFit:
    intercept: float
    beta: np.ndarray
    lambda_: float
    n_iterations: int
    converged: bool
    columns: tuple[str, ...]
    objective_path: tuple[float, ...]

    def nonzero(self) -> list[tuple[str, float]]:
        return [(self.columns[j], float(self.beta[j]))
                for j in np.flatnonzero(self.beta)]


def _as_csc(X) -> tuple[sparse.csc_matrix, tuple[str, ...]]:
    if isinstance(X, FeatureMatrix):
        columns = X.columns
        mat = X.X
    else:
        mat = X
        columns = tuple(f"x{j}" for j in range(mat.shape[1]))
    csc = sparse.csc_matrix(mat, dtype=np.float64)
    if not np.all(np.isfinite(csc.data)):
        raise NonFinite("design matrix contains non-finite values")
    return csc, columns


def _as_labels(y) -> np.ndarray:
    arr = np.asarray(y, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise NonFinite("labels contain non-finite values")
    if not np.all((arr == 0.0) | (arr == 1.0)):
        raise BadConfig("labels must be binary 0/1")
    if arr.min() == arr.max():
        raise DegenerateLabels("labels are constant; nothing to classify")
    return arr


def lambda_max(X, y) -> float:
    """Smallest penalty that keeps every coefficient at zero."""
    csc, _ = _as_csc(X)
    arr = _as_labels(y)
    resid = arr - arr.mean()
    grad = np.abs(csc.T @ resid) / len(arr)
    return float(grad.max())


def make_lambda_grid(lam_max: float, n_points: int = 50, decades: float = 4.0) -> np.ndarray:
    """Descending log-spaced grid from lambda_max down ``decades`` decades."""
    if lam_max <= 0:
        lam_max = 1e-3
    return np.logspace(np.log10(lam_max), np.log10(lam_max) - decades, n_points)


def _fit_path(csc: sparse.csc_matrix, y: np.ndarray, lambdas: np.ndarray,
              params: LassoParams, selection: bool = False):
    n, p = csc.shape
    if selection:
        tol, max_outer = params.select_tol, params.select_max_outer
        max_sweeps, max_cycles = params.select_max_sweeps, params.select_max_cycles
        # stop the path once the model is deep into the overfit regime
        dfmax = min(max(50, n // 2), p)
    else:
        tol, max_outer = params.tol, params.max_outer
        max_sweeps, max_cycles = params.max_sweeps, params.max_cycles
        dfmax = p
    return fit_logistic_lasso_path(
        csc.data, csc.indices, csc.indptr, n, p, y,
        np.asarray(lambdas, dtype=np.float64),
        tol, max_outer, max_sweeps, max_cycles, dfmax)


def fit_lasso_logistic(X, y, lambda_: float, params: LassoParams | None = None) -> LassoFit:
    """Fit at one penalty value; non-convergence returns the best iterate flagged."""
    if lambda_ < 0:
        raise BadConfig(f"lambda must be >= 0, got {lambda_}")
    params = params or LassoParams()
    params.validate()
    csc, columns = _as_csc(X)
    arr = _as_labels(y)
    if csc.shape[0] != len(arr):
        raise BadConfig(f"X has {csc.shape[0]} rows but y has {len(arr)}")
    intercepts, betas, iters, conv, objs, traces = _fit_path(
        csc, arr, np.array([lambda_]), params)
    trace = tuple(float(v) for v in traces[0] if np.isfinite(v))
    return LassoFit(intercept=float(intercepts[0]), beta=betas[0],
                    lambda_=float(lambda_), n_iterations=int(iters[0]),
                    converged=bool(conv[0]), columns=columns,
                    objective_path=trace)


def lasso_path_select(X, y, lambda_grid=None, inner_folds: int | None = None,
                      seed: int = 0, params: LassoParams | None = None
                      ) -> tuple[float, LassoFit]:
    """Pick the penalty by inner-CV mean AUROC, then refit on all rows."""
    params = params or LassoParams()
    params.validate()
    csc, columns = _as_csc(X)
    arr = _as_labels(y)
    if lambda_grid is None:
        lambda_grid = make_lambda_grid(lambda_max(csc, arr),
                                       params.n_lambdas, params.lambda_decades)
    lambda_grid = np.sort(np.asarray(lambda_grid, dtype=np.float64))[::-1].copy()
    if len(lambda_grid) == 0:
        raise BadConfig("lambda grid is empty")
    k = inner_folds if inner_folds is not None else params.inner_folds
    if k < 2:
        raise BadConfig(f"inner_folds must be >= 2, got {k}")
    min_class = int(min((arr == 1).sum(), (arr == 0).sum()))
    if min_class < 2:
        raise DegenerateLabels("need at least two patients in each class")
    k = min(k, min_class)

    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    assignment = stratified_fold_indices(arr, k, rng)
    csr = csc.tocsr()
    fold_aucs = np.full((k, len(lambda_grid)), np.nan)
    for fold in range(k):
        train = assignment != fold
        val = ~train
        sub = sparse.csc_matrix(csr[train])
        intercepts, betas, _, _, _, _ = _fit_path(sub, arr[train], lambda_grid, params,
                                                  selection=True)
        scores = csr[val] @ betas.T + intercepts[None, :]
        for li in range(len(lambda_grid)):
            fold_aucs[fold, li] = auroc(arr[val].astype(int), scores[:, li])
    mean_aucs = fold_aucs.mean(axis=0)
    best = 0
    for li in range(1, len(lambda_grid)):
        if mean_aucs[li] > mean_aucs[best]:
            best = li
    lam_star = float(lambda_grid[best])
    fit = fit_lasso_logistic(FeatureWrapper(csc, columns), arr, lam_star, params)
    return lam_star, fit


class FeatureWrapper(FeatureMatrix):
    """Lightweight FeatureMatrix view used to carry columns through refits."""

    def __init__(self, X, columns):
        object.__setattr__(self, "row_ids", tuple(str(i) for i in range(X.shape[0])))
        object.__setattr__(self, "columns", tuple(columns))
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "blocks", (("all", 0, X.shape[1]),))


def _check_columns(fit: LassoFit, X) -> sparse.csr_matrix:
    if isinstance(X, FeatureMatrix):
        if X.columns != fit.columns:
            raise ColumnMismatch("feature columns do not match the fitted model")
        mat = X.X
    else:
        mat = X
        if mat.shape[1] != len(fit.columns):
            raise ColumnMismatch(f"model has {len(fit.columns)} columns, "
                                 f"matrix has {mat.shape[1]}")
    return sparse.csr_matrix(mat, dtype=np.float64)


def predict_proba_lasso(fit: LassoFit, X) -> np.ndarray:
    """Per-row positive-class probability, sigmoid(intercept + X @ beta)."""
    csr = _check_columns(fit, X)
    eta = csr @ fit.beta + fit.intercept
    return 1.0 / (1.0 + np.exp(-eta))


def top_coefficients(fit: LassoFit, k: int) -> tuple[list[tuple[str, float]],
                                                     list[tuple[str, float]]]:
    """k strongest positive and k strongest negative nonzero coefficients."""
    if k < 1:
        raise BadConfig(f"k must be >= 1, got {k}")
    nonzero = fit.nonzero()
    positive = sorted([t for t in nonzero if t[1] > 0], key=lambda t: (-t[1], t[0]))[:k]
    negative = sorted([t for t in nonzero if t[1] < 0], key=lambda t: (t[1], t[0]))[:k]
    return positive, negative


def kkt_residuals(fit: LassoFit, X, y) -> tuple[float, float]:
    """Max KKT violations at the fitted point: (zero coords, nonzero coords)."""
    csr = _check_columns(fit, X)
    arr = _as_labels(y)
    prob = predict_proba_lasso(fit, FeatureWrapper(csr, fit.columns))
    grad = np.asarray(csr.T @ (arr - prob)).ravel() / len(arr)
    zero = fit.beta == 0.0
    viol_zero = float(np.max(np.maximum(np.abs(grad[zero]) - fit.lambda_, 0.0),
                             initial=0.0))
    viol_nonzero = float(np.max(np.abs(grad[~zero] - fit.lambda_ * np.sign(fit.beta[~zero])),
                                initial=0.0))
    return viol_zero, viol_nonzero
