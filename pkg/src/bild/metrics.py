"""Diagnostics for logits distributions and teacher/student agreement."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import as_logits, _check_k, softmax_with_temperature, top_k_select
from .trace import LogitsTrace

__all__ = [
    "TailStats",
    "OverlapReport",
    "kurtosis",
    "topk_mass",
    "tail_stats",
    "overlap_at_k",
]


@dataclass(frozen=True)
class TailStats:
    """Kurtosis plus top-k probability mass (percent) for selected k."""

    kurtosis: float
    topk_mass: dict[int, float]


@dataclass(frozen=True)
class OverlapReport:
    """Top-k index agreement between two traces at response positions.

    ``per_position`` holds one fraction in [0, 1] per response position, in
    trace order; ``mean`` is their unweighted average.
    """

    k: int
    per_position: np.ndarray
    mean: float


def kurtosis(z) -> float:
    """Non-excess population kurtosis m4 / m2^2 of a logits vector.

    Uses N-divisor central moments, so a Gaussian sample approaches 3 and a
    one-hot spike of length n approaches n. Constant input has no defined
    kurtosis and raises ValueError.
    """
    v = as_logits(z)
    if v.size < 2:
        raise ValueError("kurtosis requires at least 2 values")
    c = v - v.mean()
    m2 = float(np.mean(c * c))
    if m2 == 0.0:
        raise ValueError("kurtosis is undefined for a constant vector")
    m4 = float(np.mean(c ** 4))
    return m4 / (m2 * m2)


def topk_mass(z, k: int) -> float:
    """Percentage of softmax(z) probability mass on the top-k logits."""
    v = as_logits(z)
    kv = _check_k(k, v.size)
    p = softmax_with_temperature(v, 1.0)
    sel = top_k_select(v, kv)
    return float(100.0 * p[sel.indices].sum())


def tail_stats(z, ks=(8, 64, 512, 1024)) -> TailStats:
    """Kurtosis and top-k mass at several k for one logits vector.

    Every requested k must satisfy 1 <= k <= len(z); filter beforehand when
    the vocabulary may be small.
    """
    v = as_logits(z)
    masses = {int(k): topk_mass(v, int(k)) for k in ks}
    return TailStats(kurtosis=kurtosis(v), topk_mass=masses)


def overlap_at_k(teacher: LogitsTrace, student: LogitsTrace, k: int) -> OverlapReport:
    """Fraction of shared top-k indices, averaged over response positions.

    Positions are taken from the teacher trace's role mask; each contributes
    |top-k(teacher) ∩ top-k(student)| / k. Zero response positions is an
    error: the mean would be over an empty set.
    """
    if not isinstance(teacher, LogitsTrace) or not isinstance(student, LogitsTrace):
        raise ValueError("overlap_at_k expects two LogitsTrace arguments")
    if teacher.values.shape != student.values.shape:
        raise ValueError(
            f"trace shape mismatch: {teacher.values.shape} vs {student.values.shape}")
    n = teacher.vocab_size
    kv = _check_k(k, n)
    positions = teacher.response_positions
    if positions.size == 0:
        raise ValueError("overlap_at_k needs at least one response position")
    per_position = np.empty(positions.size, dtype=np.float64)
    for j, i in enumerate(positions):
        ti = top_k_select(teacher.values[i].astype(np.float64), kv).indices
        si = top_k_select(student.values[i].astype(np.float64), kv).indices
        per_position[j] = np.intersect1d(ti, si).size / kv
    return OverlapReport(k=kv, per_position=per_position,
                         mean=float(per_position.mean()))
