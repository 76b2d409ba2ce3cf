"""Ranking metrics: AUROC with DeLong inference, PR curves, FP projection.

AUROC is the Mann-Whitney statistic (ties count one half), computed through
midranks in O(n log n). DeLong variance and the paired AUROC test use the
structural-components formulation, so confidence intervals and two-model
comparisons come from the same machinery.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import BadRate, OneClassOnly, PatientMismatch


@dataclass(frozen=True)
class PredictionSet:
    """Pooled out-of-fold predictions: one entry per labeled patient."""

    patient_ids: tuple[str, ...]
    y_true: np.ndarray
    y_score: np.ndarray
    fold_index: np.ndarray
    model_tag: str = ""

    def __post_init__(self):
        object.__setattr__(self, "y_true", np.asarray(self.y_true, dtype=np.int8))
        object.__setattr__(self, "y_score", np.asarray(self.y_score, dtype=np.float64))
        object.__setattr__(self, "fold_index", np.asarray(self.fold_index, dtype=np.int64))


def _unpack(preds, y_score=None) -> tuple[np.ndarray, np.ndarray]:
    if y_score is not None:
        return (np.asarray(preds, dtype=np.int8), np.asarray(y_score, dtype=np.float64))
    return preds.y_true, preds.y_score


def _midranks(x: np.ndarray) -> np.ndarray:
    order = np.argsort(x, kind="mergesort")
    z = x[order]
    n = len(x)
    ranks = np.zeros(n, dtype=np.float64)
    i = 0
    while i < n:
        j = i
        while j < n and z[j] == z[i]:
            j += 1
        ranks[i:j] = 0.5 * (i + j - 1) + 1.0
        i = j
    out = np.empty(n, dtype=np.float64)
    out[order] = ranks
    return out


def _structural_components(y_true: np.ndarray, scores: np.ndarray):
    """Return (auc, per-positive components, per-negative components)."""
    pos = scores[y_true == 1]
    neg = scores[y_true == 0]
    m, n = len(pos), len(neg)
    if m == 0 or n == 0:
        raise OneClassOnly(f"need both classes, got {m} positives / {n} negatives")
    tx = _midranks(pos)
    ty = _midranks(neg)
    tz = _midranks(np.concatenate([pos, neg]))
    auc = (tz[:m].sum() - m * (m + 1) / 2.0) / (m * n)
    v01 = (tz[:m] - tx) / n   # one per positive
    v10 = 1.0 - (tz[m:] - ty) / m  # one per negative
    return auc, v01, v10


def auroc(preds, y_score=None) -> float:
    """Probability a random positive outranks a random negative (ties half)."""
    y, s = _unpack(preds, y_score)
    auc, _, _ = _structural_components(y, s)
    return float(auc)


def delong_ci(preds, level: float = 0.95, y_score=None) -> tuple[float, float, float]:
    """AUROC with a DeLong normal-approximation CI, clamped to [0, 1]."""
    y, s = _unpack(preds, y_score)
    auc, v01, v10 = _structural_components(y, s)
    m, n = len(v01), len(v10)
    var = 0.0
    if m > 1:
        var += np.var(v01, ddof=1) / m
    if n > 1:
        var += np.var(v10, ddof=1) / n
    z = stats.norm.ppf(0.5 + level / 2.0)
    half = z * np.sqrt(var)
    return float(auc), float(max(0.0, auc - half)), float(min(1.0, auc + half))


def _align(preds_a: PredictionSet, preds_b: PredictionSet):
    if set(preds_a.patient_ids) != set(preds_b.patient_ids):
        raise PatientMismatch("prediction sets cover different patients")
    index_b = {pid: i for i, pid in enumerate(preds_b.patient_ids)}
    order = np.array([index_b[pid] for pid in preds_a.patient_ids], dtype=np.int64)
    if not np.array_equal(preds_a.y_true, preds_b.y_true[order]):
        raise PatientMismatch("prediction sets disagree on true labels")
    return preds_a.y_true, preds_a.y_score, preds_b.y_score[order]


def compare_auroc_paired(preds_a: PredictionSet, preds_b: PredictionSet) -> tuple[float, float, float]:
    """Paired DeLong test on the same patients; returns (delta, z, two-sided p)."""
    y, sa, sb = _align(preds_a, preds_b)
    auc_a, v01_a, v10_a = _structural_components(y, sa)
    auc_b, v01_b, v10_b = _structural_components(y, sb)
    m, n = len(v01_a), len(v10_a)
    s01 = np.cov(np.vstack([v01_a, v01_b]), ddof=1) if m > 1 else np.zeros((2, 2))
    s10 = np.cov(np.vstack([v10_a, v10_b]), ddof=1) if n > 1 else np.zeros((2, 2))
    s = s01 / m + s10 / n
    var = s[0, 0] + s[1, 1] - 2.0 * s[0, 1]
    delta = auc_a - auc_b
    if var <= 1e-16:
        if abs(delta) < 1e-12:
            return float(delta), 0.0, 1.0
        return float(delta), float(np.sign(delta) * np.inf), 0.0
    z = delta / np.sqrt(var)
    p = 2.0 * stats.norm.sf(abs(z))
    return float(delta), float(z), float(p)


@dataclass(frozen=True)
class PrCurve:
    thresholds: np.ndarray  # strictly decreasing
    recall: np.ndarray      # non-decreasing down the list
    precision: np.ndarray


def pr_curve(preds, y_score=None) -> PrCurve:
    """One point per distinct score; positive means score >= threshold."""
    y, s = _unpack(preds, y_score)
    n_pos = int((y == 1).sum())
    n_neg = int((y == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise OneClassOnly(f"need both classes, got {n_pos} positives / {n_neg} negatives")
    order = np.argsort(-s, kind="mergesort")
    s_sorted = s[order]
    y_sorted = y[order]
    tp = np.cumsum(y_sorted == 1)
    fp = np.cumsum(y_sorted == 0)
    # last index of each distinct threshold block
    last = np.nonzero(np.diff(s_sorted, append=np.nan))[0]
    thresholds = s_sorted[last]
    recall = tp[last] / n_pos
    precision = tp[last] / (tp[last] + fp[last])
    return PrCurve(thresholds=thresholds, recall=recall, precision=precision)


@dataclass(frozen=True)
class OperatingPoint:
    threshold: float
    sensitivity: float
    ppv: float


def operating_point(curve: PrCurve, target_sensitivity: float) -> OperatingPoint:
    """Highest threshold whose recall reaches the target."""
    if not (0.0 < target_sensitivity <= 1.0):
        raise BadRate(f"target sensitivity must be in (0, 1], got {target_sensitivity}")
    idx = int(np.argmax(curve.recall >= target_sensitivity))
    return OperatingPoint(threshold=float(curve.thresholds[idx]),
                          sensitivity=float(curve.recall[idx]),
                          ppv=float(curve.precision[idx]))


@dataclass(frozen=True)
class FpProjection:
    n_screened: float
    prevalence: float
    sensitivity: float
    ppv: float
    true_positives: float
    false_positives: float

    @property
    def rounded(self) -> int:
        return int(round(self.false_positives))


def project_false_positives(n_screened: float, prevalence: float,
                            sensitivity: float, ppv: float) -> FpProjection:
    """Expected false positives when screening ``n`` people at a given rule."""
    if n_screened < 0:
        raise BadRate(f"n_screened must be >= 0, got {n_screened}")
    for name, rate in (("prevalence", prevalence), ("sensitivity", sensitivity), ("ppv", ppv)):
        if not (0.0 < rate <= 1.0):
            raise BadRate(f"{name} must be in (0, 1], got {rate}")
    tp = n_screened * prevalence * sensitivity
    fp = tp * (1.0 - ppv) / ppv
    return FpProjection(n_screened=n_screened, prevalence=prevalence,
                        sensitivity=sensitivity, ppv=ppv,
                        true_positives=tp, false_positives=fp)
