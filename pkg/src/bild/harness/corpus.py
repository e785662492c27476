"""Synthetic instruction/response corpus from a first-order Markov source.

Each sequence opens with a uniformly drawn token, continues by sampling a
seeded random transition matrix, and closes with a span that follows a fixed
affine successor rule, so part of every sequence is exactly predictable by a
model that learns the rule. The first ceil(instruction_frac * L) positions
are masked as instruction, the rest as response.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["Corpus", "generate_corpus"]

_ROW_SHARPNESS = 2.0
_SUCC_MUL = 5
_SUCC_ADD = 1


@dataclass(frozen=True)
class Corpus:
    """Token matrix [n, L] with a parallel role mask (0 instruction, 1 response)."""

    tokens: np.ndarray
    role_mask: np.ndarray
    vocab_size: int

    def __post_init__(self):
        t = np.asarray(self.tokens, dtype=np.int64)
        m = np.asarray(self.role_mask, dtype=np.uint8)
        if t.ndim != 2 or t.shape[0] < 1 or t.shape[1] < 2:
            raise ValueError(f"tokens must be [n >= 1, L >= 2], got shape {t.shape}")
        if m.shape != t.shape:
            raise ValueError(f"role_mask shape {m.shape} does not match tokens {t.shape}")
        if t.min() < 0 or t.max() >= self.vocab_size:
            raise ValueError(f"tokens out of range for vocab_size {self.vocab_size}")
        if not np.all(m <= 1):
            raise ValueError("role_mask entries must be 0 or 1")
        object.__setattr__(self, "tokens", t)
        object.__setattr__(self, "role_mask", m)

    @property
    def n_sequences(self) -> int:
        return self.tokens.shape[0]

    @property
    def context_len(self) -> int:
        return self.tokens.shape[1]


def generate_corpus(seed: int, vocab_size: int = 64, n_sequences: int = 512,
                    context_len: int = 32, instruction_frac: float = 0.25) -> Corpus:
    """Draw a corpus. Identical arguments always produce identical tokens."""
    if vocab_size < 4:
        raise ValueError(f"vocab_size must be >= 4, got {vocab_size}")
    if n_sequences < 1:
        raise ValueError(f"n_sequences must be >= 1, got {n_sequences}")
    if context_len < 2:
        raise ValueError(f"context_len must be >= 2, got {context_len}")
    if not 0.0 <= instruction_frac < 1.0:
        raise ValueError(f"instruction_frac must lie in [0, 1), got {instruction_frac}")
    rng = np.random.default_rng(seed)
    scores = _ROW_SHARPNESS * rng.standard_normal((vocab_size, vocab_size))
    scores -= scores.max(axis=1, keepdims=True)
    rows = np.exp(scores)
    rows /= rows.sum(axis=1, keepdims=True)
    cdf = np.cumsum(rows, axis=1)
    cdf[:, -1] = 1.0

    suffix_start = context_len - max(1, context_len // 4)
    tokens = np.empty((n_sequences, context_len), dtype=np.int64)
    tokens[:, 0] = rng.integers(0, vocab_size, n_sequences)
    for i in range(1, context_len):
        prev = tokens[:, i - 1]
        if i >= suffix_start:
            tokens[:, i] = (_SUCC_MUL * prev + _SUCC_ADD) % vocab_size
        else:
            u = rng.random(n_sequences)
            tokens[:, i] = np.argmax(u[:, None] < cdf[prev], axis=1)

    # Clamp so the response region is never empty, whatever the fraction.
    n_instruction = min(math.ceil(instruction_frac * context_len), context_len - 1)
    role_mask = np.ones((n_sequences, context_len), dtype=np.uint8)
    role_mask[:, :n_instruction] = 0
    return Corpus(tokens=tokens, role_mask=role_mask, vocab_size=vocab_size)
