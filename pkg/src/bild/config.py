"""Experiment configuration: a flat ``key = value`` text format.

Files contain one assignment per line; ``#`` starts a comment (full-line or
trailing) and blank lines are skipped. Unknown keys, malformed lines,
duplicate keys, and out-of-range values all raise :class:`ConfigError` with
the offending line number. Missing keys fall back to defaults, so an empty
file is a complete, valid configuration.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .losses import LossParams, Method

__all__ = ["ConfigError", "DistillConfig", "parse_config", "DEFAULTS"]


class ConfigError(Exception):
    """A config file cannot be parsed or validated."""


@dataclass(frozen=True)
class DistillConfig:
    """Everything a distillation run needs, minus the corpus size.

    ``loss`` bundles method, temperature, and k; the rest shapes the corpus,
    the models, and the optimization. All randomness in a run derives from
    ``seed``.
    """

    loss: LossParams = field(default_factory=LossParams)
    epochs: int = 32
    batch_size: int = 16
    learning_rate: float = 0.5
    instruction_frac: float = 0.25
    seed: int = 2024
    vocab_size: int = 64
    teacher_layers: int = 2
    student_layers: int = 1
    hidden_dim: int = 32
    context_len: int = 32

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.learning_rate > 0.0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if not 0.0 <= self.instruction_frac < 1.0:
            raise ValueError(
                f"instruction_frac must lie in [0, 1), got {self.instruction_frac}")
        if self.vocab_size < 4:
            raise ValueError(f"vocab_size must be >= 4, got {self.vocab_size}")
        for name in ("teacher_layers", "student_layers", "hidden_dim"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.context_len < 2:
            raise ValueError(f"context_len must be >= 2, got {self.context_len}")


def _parse_int(text: str) -> int:
    return int(text, 10)


def _parse_float(text: str) -> float:
    value = float(text)
    if value != value or value in (float("inf"), float("-inf")):
        raise ValueError("non-finite")
    return value


def _parse_method(text: str) -> Method:
    try:
        return Method(text)
    except ValueError:
        names = ", ".join(m.value for m in Method)
        raise ValueError(f"expected one of: {names}") from None


_PARSERS = {
    "method": _parse_method,
    "temperature": _parse_float,
    "k": _parse_int,
    "epochs": _parse_int,
    "batch_size": _parse_int,
    "learning_rate": _parse_float,
    "instruction_frac": _parse_float,
    "seed": _parse_int,
    "vocab_size": _parse_int,
    "teacher_layers": _parse_int,
    "student_layers": _parse_int,
    "hidden_dim": _parse_int,
    "context_len": _parse_int,
}

DEFAULTS = DistillConfig()


def parse_config(path) -> DistillConfig:
    """Read a ``key = value`` file into a validated :class:`DistillConfig`."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc}") from exc
    values: dict[str, object] = {}
    lines_seen: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, _, rhs = line.partition("=")
        key = key.strip()
        rhs = rhs.strip()
        if key not in _PARSERS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(
                f"{path}:{lineno}: duplicate key {key!r} (first set on line {lines_seen[key]})")
        if not rhs:
            raise ConfigError(f"{path}:{lineno}: empty value for {key!r}")
        try:
            values[key] = _PARSERS[key](rhs)
        except ValueError as exc:
            raise ConfigError(
                f"{path}:{lineno}: bad value {rhs!r} for {key!r}: {exc}") from None
        lines_seen[key] = lineno
    loss_kwargs = {}
    for name in ("method", "temperature", "k"):
        if name in values:
            loss_kwargs[name] = values.pop(name)
    try:
        loss = LossParams(**loss_kwargs)
        return DistillConfig(loss=loss, **values)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
