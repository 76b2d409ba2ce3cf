"""Between-group balance table with standardized mean differences.

Binary variables use |p1 - p0| / sqrt((p1(1-p1) + p0(1-p0)) / 2); continuous
variables use the pooled-variance analogue with sample (n-1) variances;
multi-level categoricals use the multivariate Mahalanobis form over the
level-proportion vector with one level dropped and the two groups'
multinomial covariances averaged. All SMDs are reported as absolute values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyGroup
from .ingest import (
    BOOLEAN_FIELDS,
    CATEGORICAL_DOMAINS,
    NUMERIC_BOUNDS,
    STRUCTURED_COLUMNS,
    CohortDataset,
)


def smd_binary(p1: float, p0: float) -> float:
    denom = np.sqrt((p1 * (1.0 - p1) + p0 * (1.0 - p0)) / 2.0)
    if denom == 0.0:
        return 0.0 if p1 == p0 else float("inf")
    return abs(p1 - p0) / denom


def smd_continuous(x1: np.ndarray, x0: np.ndarray) -> float:
    v1 = x1.var(ddof=1) if len(x1) > 1 else 0.0
    v0 = x0.var(ddof=1) if len(x0) > 1 else 0.0
    denom = np.sqrt((v1 + v0) / 2.0)
    if denom == 0.0:
        return 0.0 if x1.mean() == x0.mean() else float("inf")
    return float(abs(x1.mean() - x0.mean()) / denom)


def smd_categorical(p1: np.ndarray, p0: np.ndarray) -> float:
    """Multivariate SMD over level proportions (drop last level)."""
    if len(p1) == 2:
        return smd_binary(float(p1[0]), float(p0[0]))
    t = (p1 - p0)[:-1]
    def cov(p):
        q = p[:-1]
        return np.diag(q) - np.outer(q, q)
    s = (cov(p1) + cov(p0)) / 2.0
    value = float(t @ np.linalg.pinv(s) @ t)
    return float(np.sqrt(max(value, 0.0)))


@dataclass(frozen=True)
class LevelCount:
    level: str
    n0: int
    pct0: float
    n1: int
    pct1: float


@dataclass(frozen=True)
class SmdRow:
    name: str
    kind: str  # "binary" | "continuous" | "categorical"
    smd: float
    summary0: str
    summary1: str
    levels: tuple[LevelCount, ...] = field(default=())


@dataclass(frozen=True)
class SmdTable:
    group_label: str
    n0: int
    n1: int
    rows: tuple[SmdRow, ...]

    def as_dict(self) -> dict:
        return {
            "group_label": self.group_label,
            "n_group0": self.n0,
            "n_group1": self.n1,
            "rows": [
                {
                    "name": r.name,
                    "kind": r.kind,
                    "smd": r.smd,
                    "group0": r.summary0,
                    "group1": r.summary1,
                    "levels": [
                        {"level": lv.level, "n0": lv.n0, "pct0": lv.pct0,
                         "n1": lv.n1, "pct1": lv.pct1}
                        for lv in r.levels
                    ],
                }
                for r in self.rows
            ],
        }

    def as_text(self) -> str:
        width = max(len(r.name) for r in self.rows) + 2
        lines = [f"{'Variable':<{width}}{'Group 0 (n=%d)' % self.n0:<24}"
                 f"{'Group 1 (n=%d)' % self.n1:<24}SMD"]
        for r in self.rows:
            lines.append(f"{r.name:<{width}}{r.summary0:<24}{r.summary1:<24}{r.smd:.3f}")
            for lv in r.levels:
                lines.append(f"  {lv.level:<{width - 2}}"
                             f"{'%d (%.1f%%)' % (lv.n0, 100 * lv.pct0):<24}"
                             f"{'%d (%.1f%%)' % (lv.n1, 100 * lv.pct1):<24}")
        return "\n".join(lines)


def smd_table(dataset: CohortDataset, grouping: str = "label") -> SmdTable:
    """Per-variable SMDs between the two groups defined by ``grouping``.

    ``grouping`` is either "label" (adjudicated cause) or the name of a
    boolean structured field.
    """
    if grouping == "label":
        flags = np.array(dataset.label_vector(), dtype=bool)
        group_label = "due_to_covid"
    elif grouping in BOOLEAN_FIELDS:
        flags = np.array([getattr(r, grouping) for r in dataset.records], dtype=bool)
        group_label = grouping
    else:
        raise EmptyGroup(f"unknown grouping {grouping!r}")
    records = dataset.records
    g1 = [r for r, f in zip(records, flags) if f]
    g0 = [r for r, f in zip(records, flags) if not f]
    if not g0 or not g1:
        raise EmptyGroup(f"grouping {group_label!r} puts every patient in one group")

    rows: list[SmdRow] = []
    for name in STRUCTURED_COLUMNS[1:]:
        if name == grouping:
            continue
        if name in NUMERIC_BOUNDS:
            x1 = np.array([getattr(r, name) for r in g1], dtype=np.float64)
            x0 = np.array([getattr(r, name) for r in g0], dtype=np.float64)
            rows.append(SmdRow(
                name=name, kind="continuous", smd=smd_continuous(x1, x0),
                summary0=f"{x0.mean():.1f} ({x0.std(ddof=1):.1f})",
                summary1=f"{x1.mean():.1f} ({x1.std(ddof=1):.1f})"))
        elif name in BOOLEAN_FIELDS:
            n1 = sum(1 for r in g1 if getattr(r, name))
            n0 = sum(1 for r in g0 if getattr(r, name))
            p1, p0 = n1 / len(g1), n0 / len(g0)
            rows.append(SmdRow(
                name=name, kind="binary", smd=smd_binary(p1, p0),
                summary0=f"{n0} ({100 * p0:.1f}%)",
                summary1=f"{n1} ({100 * p1:.1f}%)"))
        else:
            levels = CATEGORICAL_DOMAINS[name]
            c1 = np.array([sum(1 for r in g1 if getattr(r, name) == lv) for lv in levels],
                          dtype=np.float64)
            c0 = np.array([sum(1 for r in g0 if getattr(r, name) == lv) for lv in levels],
                          dtype=np.float64)
            p1v, p0v = c1 / len(g1), c0 / len(g0)
            rows.append(SmdRow(
                name=name, kind="categorical", smd=smd_categorical(p1v, p0v),
                summary0="", summary1="",
                levels=tuple(
                    LevelCount(level=lv, n0=int(c0[i]), pct0=float(p0v[i]),
                               n1=int(c1[i]), pct1=float(p1v[i]))
                    for i, lv in enumerate(levels))))
    return SmdTable(group_label=group_label, n0=len(g0), n1=len(g1), rows=tuple(rows))
