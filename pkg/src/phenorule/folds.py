"""Deterministic stratified fold assignment shared by outer and inner CV."""

from __future__ import annotations

import numpy as np


def stratified_fold_indices(y: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Assign each row a fold in 0..k-1.

    Per-class counts differ by at most one across folds, and total fold
    sizes differ by at most one: per-class remainders go to the folds that
    are currently smallest (classes processed positives-first).
    """
    y = np.asarray(y)
    n = len(y)
    assignment = np.full(n, -1, dtype=np.int64)
    totals = np.zeros(k, dtype=np.int64)
    for cls in (1, 0):
        rows = np.flatnonzero(y == cls)
        rows = rows[rng.permutation(len(rows))]
        base, rem = divmod(len(rows), k)
        counts = np.full(k, base, dtype=np.int64)
        if rem:
            order = np.lexsort((np.arange(k), totals))
            counts[order[:rem]] += 1
        start = 0
        for fold in range(k):
            assignment[rows[start:start + counts[fold]]] = fold
            start += counts[fold]
        totals += counts
    return assignment


def unstratified_fold_indices(n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    rows = rng.permutation(n)
    assignment = np.empty(n, dtype=np.int64)
    base, rem = divmod(n, k)
    start = 0
    for fold in range(k):
        size = base + (1 if fold < rem else 0)
        assignment[rows[start:start + size]] = fold
        start += size
    return assignment
