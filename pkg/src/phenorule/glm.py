"""Generalized linear models by IRLS, for the outcome association analyses.

``poisson_log`` covers the log-linear length-of-stay model (quasi-likelihood
mechanics: the IRLS loop is ordinary Poisson and the covariance is the
inverse Fisher information, so non-integer outcomes are fine);
``binomial_logit`` covers ICU utilization and in-hospital mortality.
Inference is Wald on the coefficient scale, reported as exp(beta) with
exp(beta +/- z * se) intervals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import (
    BadConfig,
    DidNotConverge,
    EmptyGroup,
    NonFinite,
    PhenoruleError,
    RankDeficient,
    SeparationDetected,
)
from .ingest import CohortDataset

FAMILIES = ("poisson_log", "binomial_logit")
OUTCOMES = {
    "length_of_stay": "poisson_log",
    "icu": "binomial_logit",
    "mortality": "binomial_logit",
}
COHORT_FILTERS = ("full", "due_to_covid", "not_due_to_covid")
_ETA_LIMIT = 30.0


@dataclass(frozen=True)
class GlmFit:
    columns: tuple[str, ...]
    beta: np.ndarray
    cov: np.ndarray
    n_iterations: int
    converged: bool
    deviance: float
    family: str

    def se(self) -> np.ndarray:
        return np.sqrt(np.diag(self.cov))

    def effect(self, name: str, level: float = 0.95) -> dict:
        """exp(beta) with a symmetric-on-log-scale Wald interval and p-value."""
        j = self.columns.index(name)
        se = float(self.se()[j])
        z = stats.norm.ppf(0.5 + level / 2.0)
        b = float(self.beta[j])
        wald_z = b / se if se > 0 else np.inf * np.sign(b)
        return {
            "coef": b,
            "se": se,
            "estimate": float(np.exp(b)),
            "lo": float(np.exp(b - z * se)),
            "hi": float(np.exp(b + z * se)),
            "p": float(2.0 * stats.norm.sf(abs(wald_z))),
        }


def _deviance(family: str, y: np.ndarray, mu: np.ndarray) -> float:
    if family == "poisson_log":
        term = np.where(y > 0, y * np.log(np.where(y > 0, y, 1.0) / mu), 0.0)
        return float(2.0 * np.sum(term - (y - mu)))
    # y is 0/1, so saturated terms vanish and this is -2 log-likelihood
    ll = np.where(y > 0, np.log(mu), 0.0) + np.where(y < 1, np.log(1.0 - mu), 0.0)
    return float(-2.0 * np.sum(ll))


def fit_glm(X, y, family: str, max_iter: int = 100, tol: float = 1e-10,
            columns: tuple[str, ...] | None = None) -> GlmFit:
    """IRLS to the canonical-link MLE; converges on relative deviance change."""
    if family not in FAMILIES:
        raise BadConfig(f"unknown family {family!r}")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != len(y):
        raise BadConfig("design matrix and outcome length disagree")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise NonFinite("GLM inputs contain non-finite values")
    n, p = X.shape
    if columns is None:
        columns = tuple(f"x{j}" for j in range(p))
    if np.linalg.matrix_rank(X) < p:
        raise RankDeficient(f"design matrix has rank < {p}")
    if family == "poisson_log":
        if np.any(y < 0):
            raise BadConfig("poisson_log requires nonnegative outcomes")
        if np.all(y == 0):
            raise SeparationDetected("all outcomes are zero; log-mean diverges")
        mu = y + 0.5
        eta = np.log(mu)
    else:
        if not np.all((y == 0) | (y == 1)):
            raise BadConfig("binomial_logit requires 0/1 outcomes")
        if y.min() == y.max():
            raise SeparationDetected("outcome is constant; odds diverge")
        mu = (y + 0.5) / 2.0
        eta = np.log(mu / (1.0 - mu))

    beta = np.zeros(p)
    dev = np.inf
    for iteration in range(1, max_iter + 1):
        if family == "poisson_log":
            w = mu
            z = eta + (y - mu) / mu
        else:
            w = mu * (1.0 - mu)
            z = eta + (y - mu) / w
        xw = X * w[:, None]
        info = X.T @ xw
        try:
            beta = np.linalg.solve(info, xw.T @ z)
        except np.linalg.LinAlgError:
            raise SeparationDetected("Fisher information became singular") from None
        eta = X @ beta
        if np.max(np.abs(eta)) > _ETA_LIMIT:
            raise SeparationDetected(
                "linear predictor diverged (|eta| > 30); data are separated "
                "or a cell is empty")
        mu = np.exp(eta) if family == "poisson_log" else 1.0 / (1.0 + np.exp(-eta))
        new_dev = _deviance(family, y, mu)
        if np.isfinite(dev) and abs(new_dev - dev) / (abs(new_dev) + 0.1) < tol:
            dev = new_dev
            break
        dev = new_dev
    else:
        raise DidNotConverge(f"IRLS did not converge in {max_iter} iterations")

    w = mu if family == "poisson_log" else mu * (1.0 - mu)
    info = X.T @ (X * w[:, None])
    cov = np.linalg.inv(info)
    return GlmFit(columns=columns, beta=beta, cov=cov, n_iterations=iteration,
                  converged=True, deviance=dev, family=family)


def _outcome_vector(dataset: CohortDataset, outcome: str) -> np.ndarray:
    if outcome == "length_of_stay":
        return np.array([r.length_of_stay_days for r in dataset.records])
    if outcome == "icu":
        return np.array([1.0 if r.icu_transfer else 0.0 for r in dataset.records])
    if outcome == "mortality":
        return np.array([1.0 if r.discharge_disposition == "Dead" else 0.0
                         for r in dataset.records])
    raise BadConfig(f"unknown outcome {outcome!r}")


def _design(dataset: CohortDataset, mask: np.ndarray, adjust_age: bool,
            with_interaction: bool = False):
    vax = np.array([1.0 if r.vaccinated else 0.0 for r in dataset.records])
    cols = [np.ones(mask.sum()), vax[mask]]
    names = ["intercept", "vaccinated"]
    if with_interaction:
        due = np.array([1.0 if dataset.labels[r.patient_id] else 0.0
                        for r in dataset.records])
        cols.append(due[mask])
        cols.append((vax * due)[mask])
        names.extend(["due_to_covid", "vaccinated_x_due"])
    if adjust_age:
        age = np.array([r.age_years for r in dataset.records])
        cols.append(age[mask])
        names.append("age_years")
    return np.column_stack(cols), tuple(names)


def _cohort_mask(dataset: CohortDataset, cohort: str) -> np.ndarray:
    if cohort == "full":
        return np.ones(len(dataset.records), dtype=bool)
    flags = np.array(dataset.label_vector(), dtype=bool)
    return flags if cohort == "due_to_covid" else ~flags


def interaction_test(dataset: CohortDataset, outcome: str,
                     family: str | None = None,
                     adjust_age: bool = False) -> tuple[float, float]:
    """Exposure-by-cause interaction on the full cohort; returns (beta, p)."""
    family = family or OUTCOMES[outcome]
    flags = np.array(dataset.label_vector(), dtype=bool)
    if flags.all() or not flags.any():
        raise EmptyGroup("both cause strata must be non-empty")
    mask = np.ones(len(dataset.records), dtype=bool)
    X, names = _design(dataset, mask, adjust_age, with_interaction=True)
    y = _outcome_vector(dataset, outcome)
    fit = fit_glm(X, y, family, columns=names)
    cell = fit.effect("vaccinated_x_due")
    return cell["coef"], cell["p"]


def run_outcome_analyses(dataset: CohortDataset, adjust_age: bool = False) -> dict:
    """Exposure effects per outcome and cohort filter, plus interaction tests.

    Returns a JSON-ready dict; a failing cell carries an ``error`` entry and
    leaves the other cells intact.
    """
    if dataset.labels is None:
        raise EmptyGroup("outcome analyses need a labeled cohort")
    report: dict = {"adjust_age": adjust_age, "exposure": "vaccinated",
                    "reference": "unvaccinated", "outcomes": {}}
    for outcome, family in OUTCOMES.items():
        measure = "relative_rate" if family == "poisson_log" else "odds_ratio"
        entry: dict = {"family": family, "measure": measure, "cohorts": {}}
        y_all = _outcome_vector(dataset, outcome)
        for cohort in COHORT_FILTERS:
            mask = _cohort_mask(dataset, cohort)
            if mask.sum() == 0:
                entry["cohorts"][cohort] = {"error": "empty subcohort"}
                continue
            try:
                X, names = _design(dataset, mask, adjust_age)
                fit = fit_glm(X, y_all[mask], family, columns=names)
                cell = fit.effect("vaccinated")
                cell["n"] = int(mask.sum())
                entry["cohorts"][cohort] = cell
            except PhenoruleError as exc:
                entry["cohorts"][cohort] = {"error": f"{type(exc).__name__}: {exc}"}
        try:
            beta_int, p_int = interaction_test(dataset, outcome, family, adjust_age)
            entry["interaction"] = {"coef": beta_int, "p": p_int}
        except PhenoruleError as exc:
            entry["interaction"] = {"error": f"{type(exc).__name__}: {exc}"}
        report["outcomes"][outcome] = entry
    return report
