"""Distillation losses over teacher/student logits, with analytic gradients.

Six losses share one calling convention: ``loss(zt, zs, temperature, ...)``
where ``zt`` and ``zs`` are same-length 1-D logits vectors for the teacher
and student. Every loss returns a :class:`LossValue`; pass
``want_gradient=True`` to also get the gradient with respect to the student
logits. All KL divergences place the teacher-derived distribution in the
reference slot, in both directions of the logits-difference pair.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .core import (
    as_logits,
    _check_k,
    _check_temperature,
    _pairwise_unchecked,
    _top_k_indices,
    gather,
    pair_order,
    top_k_select,
)
from .trace import LogitsTrace

__all__ = [
    "Method",
    "LossParams",
    "LossValue",
    "SequenceLossResult",
    "InfiniteDivergenceError",
    "DEFAULT_TEMPERATURE",
    "DEFAULT_BILD_K",
    "DEFAULT_TOPK_KL_K",
    "kl_divergence",
    "vanilla_kl_loss",
    "reverse_kl_loss",
    "topk_kl_loss",
    "tld_loss",
    "sld_loss",
    "bild_loss",
    "sequence_loss",
]

DEFAULT_TEMPERATURE = 3.0
DEFAULT_BILD_K = 8
DEFAULT_TOPK_KL_K = 1024


class Method(str, enum.Enum):
    """Distillation objective selector. Values double as CLI/config names."""

    VANILLA_KL = "vanilla_kl"
    REVERSE_KL = "reverse_kl"
    TOPK_KL = "topk_kl"
    TLD = "tld"
    SLD = "sld"
    BILD = "bild"


_DEFAULT_K = {
    Method.TOPK_KL: DEFAULT_TOPK_KL_K,
    Method.TLD: DEFAULT_BILD_K,
    Method.SLD: DEFAULT_BILD_K,
    Method.BILD: DEFAULT_BILD_K,
}


@dataclass(frozen=True)
class LossParams:
    """Bundle of method, temperature, and truncation size.

    ``k`` left as None means "use the method's default": 8 for the
    logits-difference losses, 1024 for top-k KL. Methods without a
    truncation (vanilla and reverse KL) resolve to None.
    """

    method: Method = Method.BILD
    temperature: float = DEFAULT_TEMPERATURE
    k: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        object.__setattr__(self, "temperature", _check_temperature(self.temperature))
        if self.k is not None:
            kv = int(self.k)
            if kv != self.k or kv < 1:
                raise ValueError(f"k must be a positive integer or None, got {self.k!r}")
            object.__setattr__(self, "k", kv)

    @property
    def resolved_k(self) -> int | None:
        """Effective k after applying per-method defaults."""
        if self.k is not None and self.method in _DEFAULT_K:
            return self.k
        return _DEFAULT_K.get(self.method)


@dataclass(frozen=True)
class LossValue:
    """A scalar loss, optionally with d(loss)/d(student logits).

    ``degenerate`` marks the k <= 2 logits-difference cases where the loss
    is identically zero by construction rather than by agreement.
    """

    value: float
    gradient: np.ndarray | None = None
    degenerate: bool = False


@dataclass(frozen=True)
class SequenceLossResult:
    """Per-position losses over a trace pair plus their mean.

    ``gradient`` (when requested) is the [M, N] gradient of the *mean* loss
    with respect to the student logits.
    """

    per_position: np.ndarray
    mean: float
    gradient: np.ndarray | None = None


class InfiniteDivergenceError(ValueError):
    """KL(p || q) diverges: some p[i] > 0 where q[i] == 0."""


def kl_divergence(p, q) -> float:
    """KL divergence between two probability vectors, with 0·log(0) = 0.

    Raises :class:`InfiniteDivergenceError` when the divergence is +inf,
    and ValueError for inputs that are not probability vectors.
    """
    pv = _as_probabilities(p, "p")
    qv = _as_probabilities(q, "q")
    if pv.size != qv.size:
        raise ValueError(f"length mismatch: {pv.size} vs {qv.size}")
    support = pv > 0.0
    if np.any(qv[support] == 0.0):
        raise InfiniteDivergenceError("KL(p || q) is infinite: p has mass where q has none")
    ps = pv[support]
    return float(np.dot(ps, np.log(ps) - np.log(qv[support])))


def _as_probabilities(x, name: str) -> np.ndarray:
    v = as_logits(x, name=name)
    if np.any(v < 0.0):
        raise ValueError(f"{name} has negative entries")
    total = v.sum()
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"{name} must sum to 1 (got {total!r})")
    return v


def _log_softmax(z: np.ndarray, temperature: float) -> np.ndarray:
    """Log-domain tempered softmax of an already-validated float64 vector."""
    s = z / temperature
    s = s - s.max()
    return s - np.log(np.exp(s).sum())


def _kl_from_logits(za: np.ndarray, zb: np.ndarray, temperature: float) -> float:
    """KL[softmax(za/T) || softmax(zb/T)] without forming probabilities of zb."""
    la = _log_softmax(za, temperature)
    lb = _log_softmax(zb, temperature)
    return float(np.dot(np.exp(la), la - lb))


def _check_pair(zt, zs) -> tuple[np.ndarray, np.ndarray]:
    t = as_logits(zt, name="teacher logits")
    s = as_logits(zs, name="student logits")
    if t.size != s.size:
        raise ValueError(f"teacher/student length mismatch: {t.size} vs {s.size}")
    return t, s


def vanilla_kl_loss(zt, zs, temperature: float = DEFAULT_TEMPERATURE, *,
                    want_gradient: bool = False) -> LossValue:
    """Forward KL between tempered teacher and student distributions.

    Gradient w.r.t. the student logits is (softmax(zs/T) - softmax(zt/T))/T.
    """
    t, s = _check_pair(zt, zs)
    tv = _check_temperature(temperature)
    lt = _log_softmax(t, tv)
    ls = _log_softmax(s, tv)
    pt = np.exp(lt)
    value = float(np.dot(pt, lt - ls))
    gradient = (np.exp(ls) - pt) / tv if want_gradient else None
    return LossValue(value=value, gradient=gradient)


def reverse_kl_loss(zt, zs, temperature: float = DEFAULT_TEMPERATURE, *,
                    want_gradient: bool = False) -> LossValue:
    """KL with the roles swapped: student distribution in the reference slot."""
    t, s = _check_pair(zt, zs)
    tv = _check_temperature(temperature)
    lt = _log_softmax(t, tv)
    ls = _log_softmax(s, tv)
    qs = np.exp(ls)
    diff = ls - lt
    value = float(np.dot(qs, diff))
    gradient = qs * (diff - value) / tv if want_gradient else None
    return LossValue(value=value, gradient=gradient)


def topk_kl_loss(zt, zs, temperature: float = DEFAULT_TEMPERATURE,
                 k: int = DEFAULT_TOPK_KL_K, *, want_gradient: bool = False) -> LossValue:
    """Forward KL restricted to the teacher's top-k logit positions.

    Both vectors are sliced at the teacher's top-k indices and re-normalized
    at temperature T before the divergence. With k == N this equals
    :func:`vanilla_kl_loss` (same slice, merely reordered).
    """
    t, s = _check_pair(zt, zs)
    tv = _check_temperature(temperature)
    sel = top_k_select(t, _check_k(k, t.size))
    a = sel.values
    b = gather(s, sel.indices)
    la = _log_softmax(a, tv)
    lb = _log_softmax(b, tv)
    pa = np.exp(la)
    value = float(np.dot(pa, la - lb))
    gradient = None
    if want_gradient:
        gradient = np.zeros_like(s)
        gradient[sel.indices] = (np.exp(lb) - pa) / tv
    return LossValue(value=value, gradient=gradient)


def _logits_difference_loss(z_lead: np.ndarray, z_other: np.ndarray,
                            temperature: float, k: int, *,
                            teacher_leads: bool, want_gradient: bool) -> LossValue:
    """Shared body of the two logits-difference losses.

    The leading vector picks the top-k positions; both vectors are sliced
    there, expanded into pairwise-difference vectors, tempered, and compared
    with KL. The teacher-derived distribution is always the KL reference,
    whichever side led the selection. Gradients flow to the student slice
    only; the selection itself is treated as locally constant.
    """
    n = z_lead.size
    kv = _check_k(k, n)
    if kv <= 2:
        # One selected logit gives no pairs; two give a single difference
        # whose softmax is the point mass [1.0] on both sides. Either way
        # the divergence is identically zero and carries no signal.
        gradient = np.zeros(n) if want_gradient else None
        return LossValue(value=0.0, gradient=gradient, degenerate=True)
    indices = _top_k_indices(z_lead, kv)
    d_lead = _pairwise_unchecked(z_lead[indices])
    d_other = _pairwise_unchecked(z_other[indices])
    if teacher_leads:
        d_teacher, d_student = d_lead, d_other
    else:
        d_teacher, d_student = d_other, d_lead
    lt = _log_softmax(d_teacher, temperature)
    ls = _log_softmax(d_student, temperature)
    pt = np.exp(lt)
    value = float(np.dot(pt, lt - ls))
    gradient = None
    if want_gradient:
        g = (np.exp(ls) - pt) / temperature
        slice_grad = np.zeros(kv)
        for e, (m, n_) in enumerate(pair_order(kv)):
            slice_grad[m] += g[e]
            slice_grad[n_] -= g[e]
        gradient = np.zeros(n)
        gradient[indices] = slice_grad
    return LossValue(value=value, gradient=gradient)


def tld_loss(zt, zs, temperature: float = DEFAULT_TEMPERATURE,
             k: int = DEFAULT_BILD_K, *, want_gradient: bool = False) -> LossValue:
    """Teacher-led logits-difference loss.

    The teacher's top-k positions define the slice; KL compares the
    teacher's tempered difference distribution (reference) against the
    student's at the same positions.
    """
    t, s = _check_pair(zt, zs)
    tv = _check_temperature(temperature)
    return _logits_difference_loss(t, s, tv, k, teacher_leads=True,
                                   want_gradient=want_gradient)


def sld_loss(zt, zs, temperature: float = DEFAULT_TEMPERATURE,
             k: int = DEFAULT_BILD_K, *, want_gradient: bool = False) -> LossValue:
    """Student-led logits-difference loss.

    The student's top-k positions define the slice, exposing its own ranking
    errors; the teacher's difference distribution at those positions is
    still the KL reference. The student's selection is treated as locally
    constant when differentiating.
    """
    t, s = _check_pair(zt, zs)
    tv = _check_temperature(temperature)
    return _logits_difference_loss(s, t, tv, k, teacher_leads=False,
                                   want_gradient=want_gradient)


def bild_loss(zt, zs, temperature: float = DEFAULT_TEMPERATURE,
              k: int = DEFAULT_BILD_K, *, want_gradient: bool = False) -> LossValue:
    """Bi-directional logits-difference loss: sum of the t-LD and s-LD terms."""
    t, s = _check_pair(zt, zs)
    tv = _check_temperature(temperature)
    t_part = _logits_difference_loss(t, s, tv, k, teacher_leads=True,
                                     want_gradient=want_gradient)
    s_part = _logits_difference_loss(s, t, tv, k, teacher_leads=False,
                                     want_gradient=want_gradient)
    gradient = None
    if want_gradient:
        gradient = t_part.gradient + s_part.gradient
    return LossValue(value=t_part.value + s_part.value, gradient=gradient,
                     degenerate=t_part.degenerate or s_part.degenerate)


_POSITION_LOSSES = {
    Method.VANILLA_KL: lambda zt, zs, t, k, wg: vanilla_kl_loss(zt, zs, t, want_gradient=wg),
    Method.REVERSE_KL: lambda zt, zs, t, k, wg: reverse_kl_loss(zt, zs, t, want_gradient=wg),
    Method.TOPK_KL: lambda zt, zs, t, k, wg: topk_kl_loss(zt, zs, t, k, want_gradient=wg),
    Method.TLD: lambda zt, zs, t, k, wg: tld_loss(zt, zs, t, k, want_gradient=wg),
    Method.SLD: lambda zt, zs, t, k, wg: sld_loss(zt, zs, t, k, want_gradient=wg),
    Method.BILD: lambda zt, zs, t, k, wg: bild_loss(zt, zs, t, k, want_gradient=wg),
}


def sequence_loss(teacher: LogitsTrace, student: LogitsTrace, params: LossParams, *,
                  want_gradient: bool = False) -> SequenceLossResult:
    """Apply a loss across aligned traces, respecting the role mask.

    Response positions (mask == 1) use ``params.method``; instruction
    positions (mask == 0) always use vanilla KL at the same temperature.
    Both traces must agree in shape and mask. Returns per-position losses,
    their unweighted mean, and optionally the gradient of the mean.
    """
    if not isinstance(teacher, LogitsTrace) or not isinstance(student, LogitsTrace):
        raise ValueError("sequence_loss expects two LogitsTrace arguments")
    if teacher.values.shape != student.values.shape:
        raise ValueError(
            f"trace shape mismatch: {teacher.values.shape} vs {student.values.shape}")
    if not np.array_equal(teacher.role_mask, student.role_mask):
        raise ValueError("trace role masks differ")
    params = params if isinstance(params, LossParams) else LossParams(**params)
    m, n = teacher.values.shape
    k = params.resolved_k
    response_fn = _POSITION_LOSSES[params.method]
    per_position = np.empty(m, dtype=np.float64)
    gradient = np.zeros((m, n), dtype=np.float64) if want_gradient else None
    for i in range(m):
        zt = teacher.values[i].astype(np.float64)
        zs = student.values[i].astype(np.float64)
        if teacher.role_mask[i]:
            result = response_fn(zt, zs, params.temperature, k, want_gradient)
        else:
            result = vanilla_kl_loss(zt, zs, params.temperature, want_gradient=want_gradient)
        per_position[i] = result.value
        if want_gradient:
            gradient[i] = result.gradient / m
    return SequenceLossResult(per_position=per_position,
                              mean=float(per_position.mean()),
                              gradient=gradient)
