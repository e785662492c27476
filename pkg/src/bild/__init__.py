"""Bi-directional logits-difference distillation.

A numpy library for comparing teacher and student logits: the BiLD loss and
its KL baselines with analytic gradients, tail-concentration diagnostics,
top-k overlap, a binary trace format, and a small self-contained experiment
harness. The ``bild`` command line exposes the same operations on dump
files; see the README for the stable JSON schema.
"""

from .config import ConfigError, DistillConfig, parse_config
from .core import (
    TopKSelection,
    gather,
    log_softmax_with_temperature,
    pair_order,
    pairwise_differences,
    softmax_with_temperature,
    top_k_select,
)
from .losses import (
    DEFAULT_BILD_K,
    DEFAULT_TEMPERATURE,
    DEFAULT_TOPK_KL_K,
    InfiniteDivergenceError,
    LossParams,
    LossValue,
    Method,
    SequenceLossResult,
    bild_loss,
    kl_divergence,
    reverse_kl_loss,
    sequence_loss,
    sld_loss,
    tld_loss,
    topk_kl_loss,
    vanilla_kl_loss,
)
from .metrics import OverlapReport, TailStats, kurtosis, overlap_at_k, tail_stats, topk_mass
from .trace import (
    BadMagicError,
    BadMaskByteError,
    BadVersionError,
    FormatError,
    LogitsTrace,
    NonFiniteValueError,
    SizeMismatchError,
    read_dump,
    write_dump,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # config
    "ConfigError",
    "DistillConfig",
    "parse_config",
    # core
    "TopKSelection",
    "gather",
    "log_softmax_with_temperature",
    "pair_order",
    "pairwise_differences",
    "softmax_with_temperature",
    "top_k_select",
    # losses
    "DEFAULT_BILD_K",
    "DEFAULT_TEMPERATURE",
    "DEFAULT_TOPK_KL_K",
    "InfiniteDivergenceError",
    "LossParams",
    "LossValue",
    "Method",
    "SequenceLossResult",
    "bild_loss",
    "kl_divergence",
    "reverse_kl_loss",
    "sequence_loss",
    "sld_loss",
    "tld_loss",
    "topk_kl_loss",
    "vanilla_kl_loss",
    # metrics
    "OverlapReport",
    "TailStats",
    "kurtosis",
    "overlap_at_k",
    "tail_stats",
    "topk_mass",
    # trace
    "BadMagicError",
    "BadMaskByteError",
    "BadVersionError",
    "FormatError",
    "LogitsTrace",
    "NonFiniteValueError",
    "SizeMismatchError",
    "read_dump",
    "write_dump",
]
