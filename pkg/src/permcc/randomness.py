"""Seeded randomness views for two-party protocols.

A :class:`RandomnessMode` names the correlation model: ``perfect`` (both
parties read identical streams), ``correlated`` with parameter ``rho`` (each
bit pair is drawn from a doubly symmetric binary source: uniform marginals,
``Pr[r = s] = (1 + rho) / 2``), or ``private`` (independent streams,
``rho = 0``).  A single 64-bit seed drives both views.

Construction of a correlated bit pair: the shared bit ``u`` comes from one
keyed stream, Bob's bit is ``u XOR noise`` where ``noise`` is 1 with
probability ``(1 - rho) / 2``, drawn from a disjoint stream.  The noise
threshold is quantised to 16 bits, so the realised correlation is
``effective_rho`` -- exact whenever ``(1 - rho) / 2`` is a multiple of
``2**-16`` (in particular for rho in {0, 0.5, 1}) and within ``2**-15``
otherwise.  Protocols must use :attr:`RandomnessMode.effective_rho` in any
threshold they derive from the correlation, keeping them self-consistent.

The module also provides two derived constructions used by the protocols:
hash families with rho-correlated outputs, and streams of correlated
approximately-Gaussian vector pairs (sums of K correlated sign bits).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import rng

_U_SUFFIX = ".u"
_NOISE_SUFFIX = ".noise"
_BINOM_SUFFIX = ".binom"

ALICE = "alice"
BOB = "bob"


@dataclass(frozen=True)
class RandomnessMode:
    """Correlation model plus master seed for one experiment."""

    kind: str  # "perfect" | "correlated" | "private"
    rho: float
    seed: int

    def __post_init__(self):
        if self.kind not in ("perfect", "correlated", "private"):
            raise ValueError(f"unknown randomness kind {self.kind!r}")
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [0, 1]")

    @classmethod
    def perfect(cls, seed: int) -> "RandomnessMode":
        return cls("perfect", 1.0, seed)

    @classmethod
    def correlated(cls, rho: float, seed: int) -> "RandomnessMode":
        # rho = 1 is public randomness and rho = 0 private; normalise so the
        # fast paths and validity checks see the canonical kind.
        if rho >= 1.0:
            return cls.perfect(seed)
        if rho <= 0.0:
            return cls.private(seed)
        return cls("correlated", float(rho), seed)

    @classmethod
    def private(cls, seed: int) -> "RandomnessMode":
        return cls("private", 0.0, seed)

    @property
    def noise_threshold(self) -> int:
        """Quantised 16-bit threshold for the noise probability (1-rho)/2."""
        return int(round((1.0 - self.rho) / 2.0 * 65536.0))

    @property
    def effective_rho(self) -> float:
        """Correlation actually realised by the quantised noise stream."""
        return 1.0 - 2.0 * self.noise_threshold / 65536.0

    def with_seed(self, seed: int) -> "RandomnessMode":
        return RandomnessMode(self.kind, self.rho, seed)


def _noise_words(key: int, stream: int, start_word: int, count: int,
                 threshold: int) -> np.ndarray:
    """``count`` packed words of Bernoulli(threshold / 2**16) noise bits."""
    if threshold == 0:
        return np.zeros(count, dtype=np.uint64)
    lo = 16 * start_word
    raw = rng.keyed_words(key, stream, np.arange(lo, lo + 16 * count, dtype=np.uint64))
    lanes = raw.astype("<u8", copy=False).view("<u2")
    return np.packbits(lanes < np.uint16(threshold), bitorder="little").view("<u8")


class DsbsView:
    """One party's view of a labelled DSBS bit stream (random word access)."""

    def __init__(self, mode: RandomnessMode, session: int, label: str, party: str):
        if party not in (ALICE, BOB):
            raise ValueError(party)
        self.mode = mode
        self.party = party
        self._u = rng.stream_key(label + _U_SUFFIX)
        self._n = rng.stream_key(label + _NOISE_SUFFIX)
        self._key = session

    def bit_words(self, start_word: int, count: int) -> np.ndarray:
        """Packed uint64 words of this party's bits."""
        idx = np.arange(start_word, start_word + count, dtype=np.uint64)
        words = rng.keyed_words(self._key, self._u, idx)
        if self.party == BOB:
            words ^= _noise_words(self._key, self._n, start_word, count,
                                  self.mode.noise_threshold)
        return words

    def bits(self, start: int, count: int) -> np.ndarray:
        """0/1 uint8 array of this party's bits [start, start + count)."""
        w0, w1 = start // 64, (start + count + 63) // 64
        raw = rng.unpack_bits(self.bit_words(w0, w1 - w0), (w1 - w0) * 64)
        off = start - 64 * w0
        return raw[off:off + count]


def dsbs_stream(mode: RandomnessMode, label: str = "dsbs",
                session: int | None = None) -> tuple[DsbsView, DsbsView]:
    """Paired per-party views of one correlated bit stream."""
    key = mode.seed if session is None else session
    return (DsbsView(mode, key, label, ALICE), DsbsView(mode, key, label, BOB))


class CorrelatedHashFamily:
    """Hash functions h_A, h_B : [n] -> {0,1}^r with rho-correlated outputs.

    For every item ``i`` and bit position, the pair of bits is one DSBS(rho)
    draw; across distinct (item, position) pairs the draws are independent.
    Each side is computable from that side's view alone.
    """

    def __init__(self, n: int, r: int, mode: RandomnessMode,
                 label: str = "hash", session: int | None = None):
        if r < 1:
            raise ValueError("hash width r must be >= 1")
        self.n = n
        self.r = r
        self.mode = mode
        self.words_per_item = (r + 63) // 64
        key = mode.seed if session is None else session
        self._views = dsbs_stream(mode, label, key)

    def _packed(self, party: str, items: np.ndarray) -> np.ndarray:
        """(len(items), words_per_item) packed hashes, pad lanes zeroed."""
        view = self._views[0] if party == ALICE else self._views[1]
        items = np.asarray(items, dtype=np.int64)
        wp = self.words_per_item
        idx = (items[:, None] * wp + np.arange(wp)[None, :]).astype(np.uint64)
        words = rng.keyed_words(view._key, view._u, idx.ravel())
        if party == BOB:
            flat = idx.ravel()
            noise = _gather_noise_words(view._key, view._n, flat,
                                        self.mode.noise_threshold)
            words = words ^ noise
        words = words.reshape(len(items), wp)
        tail = self.r % 64
        if tail:
            words[:, -1] &= np.uint64((1 << tail) - 1)
        return words

    def alice_packed(self, items) -> np.ndarray:
        return self._packed(ALICE, items)

    def bob_packed(self, items) -> np.ndarray:
        return self._packed(BOB, items)

    def h_a(self, item: int) -> np.ndarray:
        """Alice's hash of ``item`` as a 0/1 array of length r."""
        return rng.unpack_bits(self.alice_packed([item])[0], self.r)

    def h_b(self, item: int) -> np.ndarray:
        """Bob's hash of ``item`` as a 0/1 array of length r."""
        return rng.unpack_bits(self.bob_packed([item])[0], self.r)


def _gather_noise_words(key: int, stream: int, word_idx: np.ndarray,
                        threshold: int) -> np.ndarray:
    """Noise words for arbitrary word indices (random access variant)."""
    if threshold == 0:
        return np.zeros(len(word_idx), dtype=np.uint64)
    lane_idx = (word_idx[:, None].astype(np.uint64) * np.uint64(16)
                + np.arange(16, dtype=np.uint64)[None, :])
    raw = rng.keyed_words(key, stream, lane_idx.ravel())
    lanes = raw.astype("<u8", copy=False).view("<u2")
    return np.packbits(lanes < np.uint16(threshold), bitorder="little").view("<u8")


def correlated_hash_family(n: int, r: int, mode: RandomnessMode,
                           label: str = "hash",
                           session: int | None = None) -> CorrelatedHashFamily:
    return CorrelatedHashFamily(n, r, mode, label, session)


class GaussianPairStream:
    """Correlated pairs of approximately standard-normal vectors.

    Coordinate ``t`` of pair ``v`` is ``(sum of K sign bits) / sqrt(K)`` where
    the sign bits are the party's side of DSBS draws; corresponding
    coordinates therefore have correlation ``effective_rho`` exactly, and the
    marginals approach N(0, 1) as K grows (K >= 16 required).
    """

    def __init__(self, dim: int, mode: RandomnessMode, K: int = 64,
                 label: str = "gauss", session: int | None = None):
        if K < 16:
            raise ValueError("K must be >= 16")
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = dim
        self.K = K
        self.mode = mode
        key = mode.seed if session is None else session
        self._views = dsbs_stream(mode, label, key)
        self._lanes = dim * K

    def _side(self, party: str, start: int, count: int) -> np.ndarray:
        view = self._views[0] if party == ALICE else self._views[1]
        bits = view.bits(start * self._lanes, count * self._lanes)
        sums = bits.reshape(count, self.dim, self.K).sum(axis=2, dtype=np.int32)
        return (2.0 * sums - self.K) / np.sqrt(self.K)

    def alice_vectors(self, start: int, count: int) -> np.ndarray:
        return self._side(ALICE, start, count)

    def bob_vectors(self, start: int, count: int) -> np.ndarray:
        return self._side(BOB, start, count)

    def pairs(self, start: int, count: int) -> tuple[np.ndarray, np.ndarray]:
        return self.alice_vectors(start, count), self.bob_vectors(start, count)


def gaussian_pair_stream(dim: int, mode: RandomnessMode, K: int = 64,
                         label: str = "gauss",
                         session: int | None = None) -> GaussianPairStream:
    return GaussianPairStream(dim, mode, K, label, session)


# -- sign-sketch sessions (bulk path for the sign-agreement protocols) -------
#
# The inner-product sign protocols only ever need, per round, the popcount of
# (party bits XOR fixed pattern) over N lanes.  Generating Bob's N lanes
# explicitly would dominate the whole suite's runtime, so his counts are
# sampled by an exact conditional decomposition instead: given the shared
# words U, the lanes where his stream differs from U form i.i.d.
# Bernoulli((1-rho)/2) draws, so conditioned on c0 = popcount(U ^ pattern)
# his count is c0 + Binomial(N - c0, q) - Binomial(c0, q).  This has exactly
# the joint law of the lane-level construction (with q kept in full double
# precision) and is keyed per session, but it is a distinct stream from the
# lane-exact accessors above.

class SketchSession:
    """Per-session sign-sketch source shared by both parties.

    Bob's counts are sampled by the binomial decomposition described above;
    the binomial stream is keyed by (session, label, salt), so distinct
    protocol stages must pass distinct salts and each call is reproducible
    independently of call order.
    """

    def __init__(self, mode: RandomnessMode, session: int, label: str,
                 nlanes: int, rounds: int):
        self.mode = mode
        self.nlanes = nlanes
        self.rounds = rounds
        self._session = session
        self._label = label
        self._words = (nlanes + 63) // 64
        u = rng.bulk_words(session, rng.stream_key(label + _U_SUFFIX),
                           rounds * self._words).reshape(rounds, self._words)
        if nlanes % 64:
            u[:, -1] &= np.uint64((1 << (nlanes % 64)) - 1)
        self._u = u

    def counts(self, party: str, pattern_words: np.ndarray,
               salt: int = 0) -> np.ndarray:
        """popcount(own bits XOR pattern) per round, as int64."""
        pat = np.asarray(pattern_words, dtype=np.uint64)
        if pat.shape != (self._words,):
            raise ValueError("pattern has wrong word count")
        base = rng.popcount(self._u ^ pat[None, :]).sum(axis=1, dtype=np.int64)
        if party == ALICE or self.mode.rho >= 1.0:
            return base
        q = (1.0 - self.mode.rho) / 2.0
        gen = rng.bulk_generator(rng.derive_key(self._session, salt),
                                 rng.stream_key(self._label + _BINOM_SUFFIX))
        up = gen.binomial(self.nlanes - base, q)
        down = gen.binomial(base, q)
        return base + up - down

    def sign_bits(self, party: str, pattern_words: np.ndarray,
                  salt: int = 0) -> np.ndarray:
        """Per-round sign of (2*count - N), i.e. of the +-1 lane sum."""
        return (2 * self.counts(party, pattern_words, salt) >= self.nlanes)


@lru_cache(maxsize=4)
def _cached_sketch(kind: str, rho: float, seed: int, session: int, label: str,
                   nlanes: int, rounds: int) -> SketchSession:
    return SketchSession(RandomnessMode(kind, rho, seed), session, label,
                         nlanes, rounds)


def sketch_session(mode: RandomnessMode, session: int, label: str,
                   nlanes: int, rounds: int) -> SketchSession:
    # cached so that Alice's and Bob's programs share one shared-word buffer
    return _cached_sketch(mode.kind, mode.rho, mode.seed, session, label,
                          nlanes, rounds)


@dataclass(frozen=True)
class PartyView:
    """One party's handle on every randomness source of one session.

    Accessors expose only this party's side; Alice-side accessors never
    consume Bob-view state and vice versa (everything is keyed, stateless
    access).
    """

    mode: RandomnessMode
    session: int
    party: str

    def dsbs(self, label: str = "dsbs") -> DsbsView:
        return DsbsView(self.mode, self.session, label, self.party)

    def hash_packed(self, label: str, n: int, r: int, items) -> np.ndarray:
        """This party's packed hashes of ``items`` from the labelled family."""
        fam = CorrelatedHashFamily(n, r, self.mode, label, self.session)
        return fam.alice_packed(items) if self.party == ALICE else fam.bob_packed(items)

    def sketch(self, label: str, nlanes: int, rounds: int) -> SketchSession:
        return sketch_session(self.mode, self.session, label, nlanes, rounds)

    def sketch_signs(self, label: str, nlanes: int, rounds: int,
                     pattern_words: np.ndarray, salt: int = 0) -> np.ndarray:
        return self.sketch(label, nlanes, rounds).sign_bits(
            self.party, pattern_words, salt)

    def gaussian_vectors(self, label: str, dim: int, K: int,
                         start: int, count: int) -> np.ndarray:
        stream = GaussianPairStream(dim, self.mode, K, label, self.session)
        if self.party == ALICE:
            return stream.alice_vectors(start, count)
        return stream.bob_vectors(start, count)

    def shared(self, label: str) -> "SharedStream":
        return SharedStream(self.mode, self.session, label)

    def shared_keyed(self, label: str, index) -> np.ndarray:
        """Random-access shared words; requires perfectly shared randomness."""
        if self.mode.rho < 1.0:
            raise RuntimeError("shared randomness requires rho = 1")
        return rng.keyed_words(self.session, rng.stream_key(label), index)

    def private_words(self, label: str, count: int) -> np.ndarray:
        """This party's private stream (independent of the other party)."""
        salt = 1 if self.party == ALICE else 2
        return rng.bulk_words(rng.derive_key(self.session, salt),
                              rng.stream_key(label + ".priv"), count)


# -- per-session shared stream for perfectly-shared-randomness protocols -----

class SharedStream:
    """Contiguous shared word stream; only meaningful at rho = 1."""

    def __init__(self, mode: RandomnessMode, session: int, label: str):
        if mode.rho < 1.0:
            raise RuntimeError("shared stream requires perfectly shared randomness")
        self._gen = rng.bulk_generator(session, rng.stream_key(label))

    def words(self, count: int) -> np.ndarray:
        return self._gen.integers(0, 1 << 64, size=count, dtype=np.uint64)

    def integers(self, count: int, bound: int) -> np.ndarray:
        return self._gen.integers(0, bound, size=count, dtype=np.int64)


def shared_stream(mode: RandomnessMode, session: int, label: str) -> SharedStream:
    return SharedStream(mode, session, label)
