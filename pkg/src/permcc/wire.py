"""Bit-level message framing helpers.

Messages on the channel are flat 0/1 uint8 arrays; parties parse them by
position, so every field width must be computable by both sides from public
parameters and bits already received.
"""

from __future__ import annotations

import numpy as np


def int_to_bits(value: int, width: int) -> np.ndarray:
    """Little-endian fixed-width encoding of a nonnegative integer."""
    if value < 0 or (width < 64 and value >> width):
        raise ValueError(f"{value} does not fit in {width} bits")
    return ((value >> np.arange(width)) & 1).astype(np.uint8)


def bits_to_int(bits: np.ndarray) -> int:
    return int((np.asarray(bits, dtype=np.int64) << np.arange(len(bits))).sum())


def ints_to_bits(values: np.ndarray, width: int) -> np.ndarray:
    """Concatenated little-endian encodings, one per value."""
    values = np.asarray(values, dtype=np.int64)
    out = ((values[:, None] >> np.arange(width)[None, :]) & 1)
    return out.astype(np.uint8).ravel()


def bits_to_ints(bits: np.ndarray, width: int) -> np.ndarray:
    mat = np.asarray(bits, dtype=np.int64).reshape(-1, width)
    return (mat << np.arange(width)[None, :]).sum(axis=1)


class Reader:
    """Sequential cursor over a received message."""

    def __init__(self, bits: np.ndarray):
        self.bits = np.asarray(bits, dtype=np.uint8)
        self.pos = 0

    def take(self, count: int) -> np.ndarray:
        if self.pos + count > len(self.bits):
            raise ValueError("message shorter than expected")
        out = self.bits[self.pos:self.pos + count]
        self.pos += count
        return out

    def take_int(self, width: int) -> int:
        return bits_to_int(self.take(width))

    @property
    def exhausted(self) -> bool:
        return self.pos == len(self.bits)
