"""Partition comparison via the Adjusted Rand Index."""

from __future__ import annotations

from math import comb

import numpy as np

from ._validation import check_partition
from .exceptions import InputError


def ari(a, b) -> float:
    """Hubert-Arabie Adjusted Rand Index between two partitions.

    Computed from the contingency table with exact integer pair counts:
    [sum_ij C(n_ij,2) - E] / [(sum_i C(a_i,2) + sum_j C(b_j,2))/2 - E]
    where E = sum_i C(a_i,2) * sum_j C(b_j,2) / C(n,2). Symmetric and
    invariant to relabelling of either partition. When the denominator
    vanishes (both partitions trivial) returns 1 if the partitions are
    identical as partitions, else 0.
    """
    a = check_partition(a, "a")
    b = check_partition(b, "b")
    if a.size != b.size:
        raise InputError(f"partition lengths differ: {a.size} vs {b.size}")
    n = a.size
    if n < 2:
        raise InputError("ARI is undefined for fewer than 2 observations")

    _, a_idx = np.unique(a, return_inverse=True)
    _, b_idx = np.unique(b, return_inverse=True)
    table = np.zeros((a_idx.max() + 1, b_idx.max() + 1), dtype=np.int64)
    np.add.at(table, (a_idx, b_idx), 1)

    sum_cells = sum(comb(int(v), 2) for v in table.ravel())
    sum_rows = sum(comb(int(v), 2) for v in table.sum(axis=1))
    sum_cols = sum(comb(int(v), 2) for v in table.sum(axis=0))
    total = comb(n, 2)

    expected = sum_rows * sum_cols / total
    max_index = 0.5 * (sum_rows + sum_cols)
    if max_index == expected:
        return 1.0 if np.array_equal(_canonical(a_idx), _canonical(b_idx)) else 0.0
    return float((sum_cells - expected) / (max_index - expected))


def _canonical(idx: np.ndarray) -> np.ndarray:
    """Relabel classes by first appearance, so equal partitions compare equal."""
    remap = {}
    out = np.empty_like(idx)
    for i, v in enumerate(idx):
        out[i] = remap.setdefault(int(v), len(remap))
    return out
