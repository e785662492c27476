"""Primitive operations on logits vectors.

Everything here works on 1-D float64 arrays and is deterministic: the same
inputs always produce the same outputs, including tie handling in top-k
selection.
"""

from __future__ import annotations

from functools import lru_cache
from typing import NamedTuple

import numpy as np

__all__ = [
    "TopKSelection",
    "as_logits",
    "softmax_with_temperature",
    "log_softmax_with_temperature",
    "top_k_select",
    "gather",
    "pair_order",
    "pairwise_differences",
]


def as_logits(x, name: str = "logits") -> np.ndarray:
    """Validate ``x`` as a non-empty 1-D finite vector and return it as float64."""
    z = np.asarray(x, dtype=np.float64)
    if z.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {z.shape}")
    if z.size == 0:
        raise ValueError(f"{name} must be non-empty")
    if not np.all(np.isfinite(z)):
        raise ValueError(f"{name} contains non-finite values")
    return z


def _check_temperature(temperature: float) -> float:
    t = float(temperature)
    if not np.isfinite(t) or t <= 0.0:
        raise ValueError(f"temperature must be a positive finite number, got {temperature!r}")
    return t


def _check_k(k: int, n: int) -> int:
    kv = int(k)
    if kv != k:
        raise ValueError(f"k must be an integer, got {k!r}")
    if not 1 <= kv <= n:
        raise ValueError(f"k must satisfy 1 <= k <= {n}, got {kv}")
    return kv


def softmax_with_temperature(x, temperature: float = 1.0) -> np.ndarray:
    """Softmax of ``x / temperature``, stabilized by max subtraction.

    The output is a probability vector: entries in [0, 1] summing to 1 up to
    rounding. Adding a constant to every logit leaves the result unchanged.
    """
    z = as_logits(x)
    t = _check_temperature(temperature)
    s = z / t
    s -= s.max()
    e = np.exp(s)
    return e / e.sum()


def log_softmax_with_temperature(x, temperature: float = 1.0) -> np.ndarray:
    """Logarithm of :func:`softmax_with_temperature`, computed in the log domain.

    Preferred over ``np.log(softmax(...))`` whenever the result feeds a KL
    divergence: it cannot underflow to ``log(0)``.
    """
    z = as_logits(x)
    t = _check_temperature(temperature)
    s = z / t
    s -= s.max()
    return s - np.log(np.exp(s).sum())


class TopKSelection(NamedTuple):
    """Result of :func:`top_k_select`.

    ``indices`` are positions into the original vector; ``values`` are the
    logits at those positions, in non-increasing order.
    """

    indices: np.ndarray
    values: np.ndarray


def _top_k_indices(zv: np.ndarray, kv: int) -> np.ndarray:
    """Core of :func:`top_k_select` for already-validated input."""
    # lexsort's last key is primary: -z sorts descending, the index range
    # breaks ties in ascending position order.
    order = np.lexsort((np.arange(zv.size), -zv))
    return order[:kv].astype(np.int64)


def top_k_select(z, k: int) -> TopKSelection:
    """Select the ``k`` largest entries of ``z``, deterministically.

    Ordering is by descending value; exact ties are broken by ascending
    index, so the selection is a pure function of the input.
    """
    zv = as_logits(z)
    kv = _check_k(k, zv.size)
    indices = _top_k_indices(zv, kv)
    return TopKSelection(indices=indices, values=zv[indices])


def gather(z, indices) -> np.ndarray:
    """Extract ``z[indices]`` after validating the index vector.

    Indices must be 1-D, in range, and pairwise distinct. Used to read the
    counterpart model's logits at the positions the leading model selected.
    """
    zv = as_logits(z)
    idx = np.asarray(indices)
    if idx.ndim != 1:
        raise ValueError(f"indices must be 1-D, got shape {idx.shape}")
    if idx.size == 0:
        raise ValueError("indices must be non-empty")
    if not np.issubdtype(idx.dtype, np.integer):
        raise ValueError(f"indices must be integers, got dtype {idx.dtype}")
    idx = idx.astype(np.int64)
    if idx.min() < 0 or idx.max() >= zv.size:
        raise ValueError(f"indices out of range for vector of length {zv.size}")
    if np.unique(idx).size != idx.size:
        raise ValueError("indices must be pairwise distinct")
    return zv[idx]


@lru_cache(maxsize=None)
def pair_order(k: int) -> tuple[tuple[int, int], ...]:
    """Canonical (m, n) ordering of the k(k-1)/2 index pairs with m < n.

    Lexicographic: (0,1), (0,2), ..., (0,k-1), (1,2), ..., (k-2,k-1). The
    difference vector and its gradient scatter both follow this order.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    return tuple((m, n) for m in range(k) for n in range(m + 1, k))


def _pairwise_unchecked(v: np.ndarray) -> np.ndarray:
    """Core of :func:`pairwise_differences` for already-validated input."""
    k = v.size
    out = np.empty(k * (k - 1) // 2, dtype=np.float64)
    # Built pair by pair: each entry is one subtraction on scalars pulled
    # from the vector, so cost grows with the number of pairs.
    i = 0
    for m in range(k - 1):
        vm = v[m]
        for n in range(m + 1, k):
            out[i] = vm - v[n]
            i += 1
    return out


def pairwise_differences(values) -> np.ndarray:
    """All ordered pairwise differences ``values[m] - values[n]`` for m < n.

    Returns a vector of length k(k-1)/2 in :func:`pair_order`; length 0 when
    k == 1. Shared constants cancel: shifting every input by c leaves the
    differences unchanged.
    """
    return _pairwise_unchecked(as_logits(values, name="values"))
