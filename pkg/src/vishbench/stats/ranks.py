from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ShapeError


def midranks(values) -> np.ndarray:
    """1-based ascending ranks; equal values share the mean of their positions."""
    v = np.asarray(values, dtype=np.float64)
    order = np.argsort(v, kind="stable")
    sv = v[order]
    ranks = np.empty(v.size)
    start = 0
    for end in range(1, v.size + 1):
        if end == v.size or sv[end] != sv[start]:
            ranks[order[start:end]] = (start + 1 + end) / 2.0
            start = end
    return ranks


def tie_sizes(values) -> list[int]:
    _, counts = np.unique(np.asarray(values), return_counts=True)
    return [int(c) for c in counts if c > 1]


@dataclass(frozen=True)
class RankMatrix:
    """Row-wise ranks of an accuracy matrix (rows: classifiers, columns: attackers).

    Rank 1 is the lowest accuracy in the row, i.e. the strongest attack.
    """

    values: np.ndarray
    ranks: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.ranks.shape

    @property
    def average_ranks(self) -> np.ndarray:
        return self.ranks.mean(axis=0)

    @property
    def rank_sums(self) -> np.ndarray:
        return self.ranks.sum(axis=0)


def rank_rows(values) -> RankMatrix:
    rows = [list(r) for r in values]
    if not rows or len({len(r) for r in rows}) != 1:
        raise ShapeError("accuracy matrix must be non-empty and rectangular")
    arr = np.asarray(rows, dtype=np.float64)
    if arr.shape[1] < 2:
        raise ShapeError("need at least two attacker columns to rank")
    if np.isnan(arr).any():
        raise ShapeError("accuracy matrix contains NaN")
    return RankMatrix(arr, np.vstack([midranks(r) for r in arr]))
