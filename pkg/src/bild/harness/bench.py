"""Loss-evaluation microbenchmarks and the runtime-vs-k scaling fit.

The logits-difference losses do quadratic work in k (k(k-1)/2 pairwise
differences on each side, twice for the bi-directional sum), so their
runtime over a k sweep should follow a power law with exponent near 2 once
k is large enough to dominate fixed per-call costs. ``fit_power_law``
estimates that exponent from the timing table.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from ..losses import Method, bild_loss, reverse_kl_loss, sld_loss, tld_loss, \
    topk_kl_loss, vanilla_kl_loss
from ..core import pairwise_differences

__all__ = ["BenchResult", "bench_losses", "fit_power_law", "time_pairwise_construction"]

DEFAULT_SIZES = (512,)
DEFAULT_K_VALUES = (8, 16, 32, 64, 128)

_FUNCTIONS = {
    Method.VANILLA_KL: lambda zt, zs, t, k, wg: vanilla_kl_loss(zt, zs, t, want_gradient=wg),
    Method.REVERSE_KL: lambda zt, zs, t, k, wg: reverse_kl_loss(zt, zs, t, want_gradient=wg),
    Method.TOPK_KL: lambda zt, zs, t, k, wg: topk_kl_loss(zt, zs, t, k, want_gradient=wg),
    Method.TLD: lambda zt, zs, t, k, wg: tld_loss(zt, zs, t, k, want_gradient=wg),
    Method.SLD: lambda zt, zs, t, k, wg: sld_loss(zt, zs, t, k, want_gradient=wg),
    Method.BILD: lambda zt, zs, t, k, wg: bild_loss(zt, zs, t, k, want_gradient=wg),
}


@dataclass(frozen=True)
class BenchResult:
    """Median per-call seconds for every (method, vocab size, k) cell.

    ``exponents`` holds the fitted runtime-vs-k power-law exponent per
    method at the largest benchmarked size (requires >= 2 distinct k).
    """

    sizes: tuple[int, ...]
    k_values: tuple[int, ...]
    methods: tuple[str, ...]
    seconds: dict[tuple[str, int, int], float]
    exponents: dict[str, float]


def fit_power_law(k_values, seconds) -> float:
    """Least-squares slope of log(seconds) against log(k)."""
    ks = np.asarray(k_values, dtype=np.float64)
    ts = np.asarray(seconds, dtype=np.float64)
    if ks.size != ts.size or ks.size < 2:
        raise ValueError("need at least two (k, seconds) points")
    if np.any(ks <= 0) or np.any(ts <= 0):
        raise ValueError("k and seconds must be positive")
    slope, _ = np.polyfit(np.log(ks), np.log(ts), 1)
    return float(slope)


def _median_call_seconds(fn, args_list, repeats: int) -> float:
    times = np.empty(repeats)
    for r in range(repeats):
        zt, zs = args_list[r % len(args_list)]
        t0 = time.perf_counter()
        fn(zt, zs)
        times[r] = time.perf_counter() - t0
    return float(np.median(times))


def bench_losses(*, sizes=DEFAULT_SIZES, k_values=DEFAULT_K_VALUES,
                 methods=tuple(Method), temperature: float = 3.0,
                 repeats: int = 30, seed: int = 0,
                 want_gradient: bool = True) -> BenchResult:
    """Time every method at every (size, k) cell on seeded gaussian logits.

    Each cell reports the median over ``repeats`` single-pair calls,
    gradient included by default since that is the training-path cost.
    Requested k must fit in every requested size.
    """
    sizes = tuple(int(s) for s in sizes)
    k_values = tuple(int(k) for k in k_values)
    methods = tuple(Method(m) for m in methods)
    if not sizes or not k_values or not methods:
        raise ValueError("sizes, k_values, and methods must be non-empty")
    if repeats < 1:
        raise ValueError(f"repeats must be >= 1, got {repeats}")
    if min(k_values) < 1 or max(k_values) > min(sizes):
        raise ValueError(f"every k must satisfy 1 <= k <= {min(sizes)}")
    rng = np.random.default_rng(seed)
    seconds: dict[tuple[str, int, int], float] = {}
    for n in sizes:
        pairs = [(3.0 * rng.standard_normal(n), 3.0 * rng.standard_normal(n))
                 for _ in range(min(repeats, 8))]
        for method in methods:
            base = _FUNCTIONS[method]
            for k in k_values:
                def call(zt, zs, _f=base, _k=k):
                    return _f(zt, zs, temperature, _k, want_gradient)
                call(*pairs[0])  # warm caches before timing
                seconds[(method.value, n, k)] = _median_call_seconds(call, pairs, repeats)
    exponents: dict[str, float] = {}
    if len(k_values) >= 2:
        top = max(sizes)
        for method in methods:
            cells = [seconds[(method.value, top, k)] for k in k_values]
            exponents[method.value] = fit_power_law(k_values, cells)
    return BenchResult(sizes=sizes, k_values=k_values,
                       methods=tuple(m.value for m in methods),
                       seconds=seconds, exponents=exponents)


def time_pairwise_construction(k_values=DEFAULT_K_VALUES, *, repeats: int = 50,
                               seed: int = 0) -> dict[int, float]:
    """Median seconds to build one difference vector at each k, in isolation."""
    rng = np.random.default_rng(seed)
    out: dict[int, float] = {}
    for k in k_values:
        v = rng.standard_normal(int(k))
        pairwise_differences(v)
        times = np.empty(repeats)
        for r in range(repeats):
            t0 = time.perf_counter()
            pairwise_differences(v)
            times[r] = time.perf_counter() - t0
        out[int(k)] = float(np.median(times))
    return out
