"""Logits traces and the LGTS binary dump format.

A trace is an [M, N] float32 matrix of per-position logits plus a length-M
role mask (0 = instruction, 1 = response). The on-disk format is:

    bytes 0..3    magic "LGTS"
    bytes 4..7    version, little-endian u32, currently 1
    bytes 8..11   flags, little-endian u32; bit 0 set when a mask follows
    bytes 12..19  M, little-endian u64
    bytes 20..27  N, little-endian u64
    bytes 28..    M*N float32 values, little-endian, row-major
    then          M mask bytes (0 or 1), only when flag bit 0 is set

Reads validate eagerly and raise a :class:`FormatError` subclass naming the
first offending byte offset. Writes always include the mask.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "MAGIC",
    "VERSION",
    "HEADER_SIZE",
    "FLAG_MASK_PRESENT",
    "FormatError",
    "BadMagicError",
    "BadVersionError",
    "SizeMismatchError",
    "NonFiniteValueError",
    "BadMaskByteError",
    "LogitsTrace",
    "write_dump",
    "read_dump",
]

MAGIC = b"LGTS"
VERSION = 1
FLAG_MASK_PRESENT = 0x1
_HEADER = struct.Struct("<4sIIQQ")
HEADER_SIZE = _HEADER.size  # 28


class FormatError(Exception):
    """A dump file violates the LGTS format."""


class BadMagicError(FormatError):
    pass


class BadVersionError(FormatError):
    pass


class SizeMismatchError(FormatError):
    pass


class NonFiniteValueError(FormatError):
    pass


class BadMaskByteError(FormatError):
    pass


@dataclass
class LogitsTrace:
    """Per-position logits with a role mask.

    ``values`` is coerced to a C-contiguous float32 [M, N] matrix and
    ``role_mask`` to uint8 [M] with entries in {0, 1}. Positions where the
    mask is 1 are response tokens; 0 marks instruction tokens.
    """

    values: np.ndarray
    role_mask: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.float32)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ValueError(f"values must be a non-empty 2-D matrix, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("values contain non-finite entries")
        m = np.ascontiguousarray(self.role_mask, dtype=np.uint8)
        if m.shape != (v.shape[0],):
            raise ValueError(
                f"role_mask must have shape ({v.shape[0]},), got {m.shape}")
        if not np.all(m <= 1):
            raise ValueError("role_mask entries must be 0 or 1")
        self.values = v
        self.role_mask = m

    @property
    def num_positions(self) -> int:
        return self.values.shape[0]

    @property
    def vocab_size(self) -> int:
        return self.values.shape[1]

    @property
    def response_positions(self) -> np.ndarray:
        """Indices of positions with mask == 1, in trace order."""
        return np.flatnonzero(self.role_mask == 1)

    def __eq__(self, other) -> bool:
        if not isinstance(other, LogitsTrace):
            return NotImplemented
        return (self.values.shape == other.values.shape
                and self.values.tobytes() == other.values.tobytes()
                and self.role_mask.tobytes() == other.role_mask.tobytes())


def write_dump(trace: LogitsTrace, path) -> None:
    """Serialize a trace to ``path`` in LGTS format (mask always included)."""
    m, n = trace.values.shape
    header = _HEADER.pack(MAGIC, VERSION, FLAG_MASK_PRESENT, m, n)
    payload = trace.values.astype("<f4", copy=False).tobytes(order="C")
    Path(path).write_bytes(header + payload + trace.role_mask.tobytes())


def read_dump(path) -> LogitsTrace:
    """Parse an LGTS file, validating every field before constructing a trace."""
    data = Path(path).read_bytes()
    if len(data) < HEADER_SIZE:
        raise SizeMismatchError(
            f"{path}: file is {len(data)} bytes, shorter than the "
            f"{HEADER_SIZE}-byte header")
    magic, version, flags, m, n = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise BadMagicError(f"{path}: bad magic {magic!r} at byte 0, expected {MAGIC!r}")
    if version != VERSION:
        raise BadVersionError(
            f"{path}: unsupported version {version} at byte 4, expected {VERSION}")
    if m < 1 or n < 1:
        raise SizeMismatchError(
            f"{path}: header at byte 12 declares empty trace (M={m}, N={n})")
    mask_present = bool(flags & FLAG_MASK_PRESENT)
    expected = HEADER_SIZE + 4 * m * n + (m if mask_present else 0)
    if len(data) != expected:
        raise SizeMismatchError(
            f"{path}: file is {len(data)} bytes but the header (M={m}, N={n}, "
            f"mask={'yes' if mask_present else 'no'}) requires exactly {expected}")
    values = np.frombuffer(data, dtype="<f4", count=m * n, offset=HEADER_SIZE)
    finite = np.isfinite(values)
    if not finite.all():
        flat = int(np.flatnonzero(~finite)[0])
        offset = HEADER_SIZE + 4 * flat
        raise NonFiniteValueError(
            f"{path}: non-finite value at position ({flat // n}, {flat % n}), "
            f"byte {offset}")
    if mask_present:
        mask = np.frombuffer(data, dtype=np.uint8, count=m, offset=HEADER_SIZE + 4 * m * n)
        bad = np.flatnonzero(mask > 1)
        if bad.size:
            pos = int(bad[0])
            offset = HEADER_SIZE + 4 * m * n + pos
            raise BadMaskByteError(
                f"{path}: mask byte {mask[pos]} at position {pos} (byte {offset}) "
                f"is neither 0 nor 1")
    else:
        # No mask stored: treat every position as response.
        mask = np.ones(m, dtype=np.uint8)
    return LogitsTrace(values=values.reshape(m, n).copy(), role_mask=mask.copy())
