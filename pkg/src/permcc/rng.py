"""Deterministic keyed random-word generation.

Two generators back everything in this package:

* ``keyed_words`` -- a SplitMix64-style finalizer over (key material, index).
  Pure function of its inputs, so any party can draw the i-th word of any
  stream without coordination and in any order.  Used wherever random access
  by index is needed (per-item hashes, per-coordinate bits).
* ``bulk_words`` / ``bulk_generator`` -- numpy's counter-based Philox keyed by
  the same material.  Much faster, but only for contiguous per-session
  streams consumed front to back.

Both are fixed algorithms: given the same 64-bit inputs they return the same
words on every platform (all arithmetic is explicit wrap-around uint64).
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)


def stream_key(label: str) -> int:
    """64-bit stream id derived from a textual label (stable across runs)."""
    digest = hashlib.blake2b(label.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def _finalize(z: np.ndarray) -> np.ndarray:
    # SplitMix64 finalizer, in place on an owned uint64 buffer.
    t = z >> _S30
    z ^= t
    z *= _MIX1
    np.right_shift(z, _S27, out=t)
    z ^= t
    z *= _MIX2
    np.right_shift(z, _S31, out=t)
    z ^= t
    return z


def keyed_words(key: int, stream: int, index) -> np.ndarray:
    """Random 64-bit words at the given indices of stream ``stream``.

    ``index`` may be an int or an integer ndarray; the result has the same
    shape.  word(key, stream, i) is a pure function of its three arguments.
    """
    idx = np.asarray(index, dtype=np.uint64)
    shape = idx.shape
    z = np.atleast_1d(idx) * _GOLDEN
    z += np.uint64(key & 0xFFFFFFFFFFFFFFFF)
    z = _finalize(z)
    z ^= np.uint64(stream & 0xFFFFFFFFFFFFFFFF)
    z *= _MIX1
    z = _finalize(z)
    return z.reshape(shape) if shape else z


def keyed_word(key: int, stream: int, index: int) -> int:
    """Scalar convenience wrapper around :func:`keyed_words`."""
    return int(keyed_words(key, stream, index)[0])


def derive_key(key: int, *parts: int) -> int:
    """Fold extra integers into a key (for per-trial / per-input sub-seeds)."""
    out = key & 0xFFFFFFFFFFFFFFFF
    for p in parts:
        out = keyed_word(out, 0x706172747354, p & 0xFFFFFFFFFFFFFFFF)
    return out


def bulk_generator(key: int, stream: int) -> np.random.Generator:
    """Counter-based Philox generator for one contiguous keyed stream."""
    bits = np.random.Philox(key=[key & 0xFFFFFFFFFFFFFFFF, stream & 0xFFFFFFFFFFFFFFFF])
    return np.random.Generator(bits)


def bulk_words(key: int, stream: int, count: int) -> np.ndarray:
    """``count`` uint64 words from the contiguous stream (front-to-back)."""
    return bulk_generator(key, stream).integers(0, 1 << 64, size=count, dtype=np.uint64)


# -- bit helpers ------------------------------------------------------------

def popcount(words: np.ndarray) -> np.ndarray:
    """Per-word set-bit counts (uint8 array)."""
    return np.bitwise_count(words)


def pack_bits(bits: np.ndarray) -> np.ndarray:
    """Pack a 0/1 array into little-endian uint64 words (padded with zeros)."""
    bits = np.asarray(bits, dtype=np.uint8).ravel()
    pad = (-len(bits)) % 64
    if pad:
        bits = np.concatenate([bits, np.zeros(pad, dtype=np.uint8)])
    return np.packbits(bits, bitorder="little").view("<u8")


def unpack_bits(words: np.ndarray, nbits: int) -> np.ndarray:
    """Inverse of :func:`pack_bits`; returns the first ``nbits`` bits."""
    raw = np.unpackbits(np.ascontiguousarray(words, dtype="<u8").view(np.uint8),
                        bitorder="little")
    return raw[:nbits]
