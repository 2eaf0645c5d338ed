"""Componentwise order, Pareto fronts and suboptimality gaps over median matrices.

A median matrix has one row per arm and one column per objective.  All
comparisons are exact float comparisons; margins are always explicit.
"""

from __future__ import annotations

import numpy as np

from .core import DomainError

__all__ = [
    "as_median_matrix",
    "dominance_matrix",
    "not_weakly_dominated",
    "pareto_front",
    "shift",
    "subopt_gap",
    "subopt_gap_pair",
    "subopt_gaps",
    "weakly_dominated",
]


def _pair(x, y) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or x.shape != y.shape:
        raise DomainError(f"objective vectors must have equal length, got {x.shape} and {y.shape}")
    return x, y


def weakly_dominated(x, y) -> bool:
    """True iff x <= y in every objective."""
    x, y = _pair(x, y)
    return bool(np.all(x <= y))


def not_weakly_dominated(x, y) -> bool:
    return not weakly_dominated(x, y)


def shift(x, a: float) -> np.ndarray:
    return np.asarray(x, dtype=float) + a


def as_median_matrix(medians) -> np.ndarray:
    arr = np.asarray(medians, dtype=float)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DomainError(f"median matrix must be K x M with K, M >= 1, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError("median matrix entries must be finite")
    return arr


def dominance_matrix(medians) -> np.ndarray:
    """Boolean K x K matrix; entry (i, j) says row i is weakly dominated by row j, i != j."""
    m = as_median_matrix(medians)
    dom = np.all(m[:, None, :] <= m[None, :, :], axis=2)
    np.fill_diagonal(dom, False)
    return dom


def pareto_front(medians) -> list[int]:
    """Arms whose median vector is weakly dominated by no other arm.

    Two arms with identical vectors dominate each other and are both left out.
    """
    dom = dominance_matrix(medians)
    return [int(i) for i in np.flatnonzero(~dom.any(axis=1))]


def subopt_gap_pair(m_i, m_j) -> float:
    """How far arm j sits above arm i in its weakest objective, clipped at zero."""
    m_i, m_j = _pair(m_i, m_j)
    return max(0.0, float(np.min(m_j - m_i)))


def subopt_gaps(medians) -> np.ndarray:
    """Suboptimality gap of every arm with respect to the Pareto front."""
    m = as_median_matrix(medians)
    front = pareto_front(m)
    if not front:
        # every arm is tied with a duplicate; there is no front to measure against
        return np.zeros(m.shape[0])
    diffs = m[front][None, :, :] - m[:, None, :]
    return np.maximum(diffs.min(axis=2).max(axis=1), 0.0)


def subopt_gap(i: int, medians) -> float:
    m = as_median_matrix(medians)
    if not 0 <= i < m.shape[0]:
        raise DomainError(f"arm index {i} out of range for K={m.shape[0]}")
    return float(subopt_gaps(m)[i])
