"""Protocols under imperfectly shared (rho-correlated) randomness.

The building blocks:

* :func:`ssi` -- exact small-set intersection: Alice transmits correlated
  hashes of her support, Bob counts his elements whose hash lands within the
  fractional-distance threshold 1/2 - rho/4 of one of Alice's.
* :func:`reverse_sparse_index` -- one hash transmits a single value; Bob
  tests membership in his (small) set.  Used for interval tests.
* :func:`gap_inner_product` -- one-way sign-sketch test: T rounds of
  sign<u, g_A> from Alice, Bob compares with sign<v, g_B> and thresholds the
  agreement frequency at the midpoint of the two hypothesis values
  1/2 + arcsin(rho * ip) / pi.
* :func:`small_hd` -- distance <= k test: a coarse stage (full distance
  scale) and a tensor-power stage (k versus k+1 resolution) must both
  accept.
* :func:`strongly_pi` -- dispatcher for gate + symmetric-vote functions.
* :func:`newmanize` -- replace shared randomness by a verified seed table
  plus a seed-index message.
* :func:`full_isr` -- the region protocol for arbitrary total functions.

Sign-sketch agreement statistics are produced by
:class:`permcc.randomness.SketchSession`, whose correlation parameter is the
mode's exact rho; hash-based tests use the lane-exact streams and therefore
``mode.effective_rho`` in their thresholds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

from . import rng, wire
from .engine import PartyProgram, ProtocolPair, ProtocolError
from .funcspec import FunctionSpec, valid_distances
from .measure import ONE_WAY, TWO_WAY, jumps as slice_jumps, measure
from .randomness import ALICE, BOB, RandomnessMode

_NORM = NormalDist()


# -- small set intersection ----------------------------------------------------

def ssi_width(a: int, b: int) -> int:
    """Default hash width for exact intersection recovery, Theta(log(ab))."""
    return 8 * max(1, math.ceil(math.log2(max(2, a * b))))


def ssi_threshold(rho_eff: float) -> float:
    """Fractional-distance acceptance cutoff between correlated hashes."""
    return 0.5 - rho_eff / 4.0


def _hash_match_count(view, label, n, r, my_items, received_packed,
                      rho_eff) -> int:
    """#items of this party whose hash is close to one of the received."""
    if len(my_items) == 0 or len(received_packed) == 0:
        return 0
    mine = view.hash_packed(label, n, r, my_items)
    dist = np.bitwise_count(mine[:, None, :] ^ received_packed[None, :, :])
    dist = dist.sum(axis=2)
    return int((dist.min(axis=1) <= ssi_threshold(rho_eff) * r).sum())


class _SsiSender(PartyProgram):
    def __init__(self, weight, r, label):
        self.weight, self.r, self.label = weight, r, label

    def start(self, bits, view):
        if int(np.sum(bits)) != self.weight:
            raise ProtocolError(f"declared weight {self.weight} != actual")
        supp = np.flatnonzero(np.asarray(bits, np.uint8))
        packed = view.hash_packed(self.label, len(bits), self.r, supp)
        return {"packed": packed}

    def step(self, state, incoming):
        rows = [rng.unpack_bits(row, self.r) for row in state["packed"]]
        msg = np.concatenate(rows) if rows else np.zeros(0, np.uint8)
        return state, msg, None


class _SsiReceiver(PartyProgram):
    def __init__(self, sender_weight, r, label):
        self.sender_weight, self.r, self.label = sender_weight, r, label

    def start(self, bits, view):
        return {"supp": np.flatnonzero(np.asarray(bits, np.uint8)),
                "view": view, "n": len(bits)}

    def step(self, state, incoming):
        packed = _pack_hash_rows(incoming, self.sender_weight, self.r)
        count = _hash_match_count(state["view"], self.label, state["n"],
                                  self.r, state["supp"], packed,
                                  state["view"].mode.effective_rho)
        return state, None, count


def _pack_hash_rows(bits, rows, r):
    per = (r + 63) // 64
    out = np.zeros((rows, per), dtype=np.uint64)
    bits = np.asarray(bits, np.uint8)
    for i in range(rows):
        out[i] = rng.pack_bits(bits[i * r:(i + 1) * r])
    return out


def ssi(a: int, b: int, r: int | None = None, direction: str = "one_way",
        label: str = "ssi") -> ProtocolPair:
    """Exact |x AND y| for declared weights (a, b).

    One-way: Alice sends her a hashes (a * r bits), Bob outputs the count.
    Two-way: roles are swapped when a > b so the smaller set is transmitted.
    """
    if r is None:
        r = ssi_width(a, b)
    swap = direction == "two_way" and a > b
    if swap:
        alice = _SsiReceiver(b, r, label)
        bob = _SsiSender(b, r, label)
        # Bob transmits; Alice needs a dummy first turn, handled by engine
        alice_first = _PassThenReceive(alice)
        return ProtocolPair(alice_first, bob, budget_bits=b * r, one_way=False,
                            meta={"protocol": "ssi", "r": r, "swapped": True})
    return ProtocolPair(_SsiSender(a, r, label), _SsiReceiver(a, r, label),
                        budget_bits=a * r, one_way=(direction == "one_way"),
                        meta={"protocol": "ssi", "r": r, "swapped": False})


class _PassThenReceive(PartyProgram):
    """Wrapper: first turn passes, second turn delegates to the receiver."""

    def __init__(self, inner):
        self.inner = inner

    def start(self, bits, view):
        return {"inner": self.inner.start(bits, view)}

    def step(self, state, incoming):
        if incoming is None:
            return state, np.zeros(0, np.uint8), None
        inner_state, msg, out = self.inner.step(state["inner"], incoming)
        state["inner"] = inner_state
        return state, msg, out


# -- reverse sparse indexing ---------------------------------------------------

def rsi_width(k: int) -> int:
    """Width giving 2^k * 2^-Omega(r) failure below 2^-Theta(k)."""
    return math.ceil(8 * (k + 3))


def rsi_send(view, label: str, domain: int, r: int, value: int) -> np.ndarray:
    packed = view.hash_packed(label, domain, r, np.array([value]))
    return rng.unpack_bits(packed[0], r)


def rsi_member(view, label: str, domain: int, r: int, members: np.ndarray,
               incoming: np.ndarray) -> bool:
    packed = _pack_hash_rows(incoming, 1, r)
    count = _hash_match_count(view, label, domain, r, np.asarray(members),
                              packed, view.mode.effective_rho)
    return count > 0


class _RsiAlice(PartyProgram):
    def __init__(self, r, label):
        self.r, self.label = r, label

    def start(self, bits, view):
        supp = np.flatnonzero(np.asarray(bits, np.uint8))
        if len(supp) != 1:
            raise ProtocolError("sender input must have weight 1")
        return {"msg": rsi_send(view, self.label, len(bits), self.r, int(supp[0]))}

    def step(self, state, incoming):
        return state, state["msg"], None


class _RsiBob(PartyProgram):
    def __init__(self, k, r, label):
        self.k, self.r, self.label = k, r, label

    def start(self, bits, view):
        supp = np.flatnonzero(np.asarray(bits, np.uint8))
        if len(supp) > 2 ** self.k:
            raise ProtocolError(f"receiver set exceeds 2^{self.k}")
        return {"supp": supp, "view": view, "n": len(bits)}

    def step(self, state, incoming):
        member = rsi_member(state["view"], self.label, state["n"], self.r,
                            state["supp"], incoming)
        return state, None, int(member)


def reverse_sparse_index(k: int, r: int | None = None,
                         label: str = "rsi") -> ProtocolPair:
    """Membership of Alice's single value in Bob's set of size <= 2^k."""
    if r is None:
        r = rsi_width(k)
    return ProtocolPair(_RsiAlice(r, label), _RsiBob(k, r, label),
                        budget_bits=r, one_way=True,
                        meta={"protocol": "reverse_sparse_index", "r": r})


# -- gap inner product (sign sketch) --------------------------------------------

def agreement_probability(rho: float, ip: float) -> float:
    """Limit probability that the two sign sketches agree on one round."""
    return 0.5 + math.asin(max(-1.0, min(1.0, rho * ip))) / math.pi


def gap_ip_rounds(c: float, s: float, rho: float, kappa: float) -> int:
    """The round count T = ceil(kappa / (rho (c - s))^2)."""
    if not -1.0 <= s < c <= 1.0:
        raise ValueError("need -1 <= s < c <= 1")
    if rho <= 0:
        raise ValueError("sign sketches need positive correlation")
    return math.ceil(kappa / (rho * (c - s)) ** 2)


def kappa_for_error(c: float, s: float, rho: float, err: float,
                    safety: float = 1.1) -> float:
    """kappa making the midpoint test err at most ``err`` (normal approx).

    Uses the true arcsin agreement gap and the binomial deviation at the two
    hypothesis frequencies, then converts back into the kappa of
    :func:`gap_ip_rounds` so the round-count formula stays the contract.
    """
    pc_ = agreement_probability(rho, c)
    ps_ = agreement_probability(rho, s)
    delta = (pc_ - ps_) / 2.0
    sigma = max(math.sqrt(pc_ * (1 - pc_)), math.sqrt(ps_ * (1 - ps_)))
    z = _NORM.inv_cdf(1.0 - min(max(err, 1e-12), 0.49))
    T = safety * (z * sigma / delta) ** 2
    return T * (rho * (c - s)) ** 2


@dataclass(frozen=True)
class SignSketchTest:
    """One sign-sketch hypothesis test, shared by both parties."""

    c: float
    s: float
    kappa: float
    nlanes: int
    K: int
    label: str
    salt: int

    def rounds(self, rho: float) -> int:
        return gap_ip_rounds(self.c, self.s, rho, self.kappa)

    def threshold(self, rho: float) -> float:
        return 0.5 * (agreement_probability(rho, self.c)
                      + agreement_probability(rho, self.s))

    def alice_bits(self, view, pattern_words) -> np.ndarray:
        T = self.rounds(view.mode.rho)
        return view.sketch_signs(self.label, self.nlanes, T, pattern_words,
                                 self.salt).astype(np.uint8)

    def bob_decide(self, view, pattern_words, incoming) -> int:
        rho = view.mode.rho
        T = self.rounds(rho)
        own = view.sketch_signs(self.label, self.nlanes, T, pattern_words,
                                self.salt)
        agree = (own == np.asarray(incoming, bool)).mean()
        return int(agree >= self.threshold(rho))


def _sign_pattern(vec_bits: np.ndarray, K: int) -> np.ndarray:
    """Packed per-lane sign bits of a flat +-1 vector repeated K times."""
    lanes = np.repeat(np.asarray(vec_bits, np.uint8), K)
    return rng.pack_bits(lanes)


class _GapIpAlice(PartyProgram):
    def __init__(self, test: SignSketchTest, K: int):
        self.test, self.K = test, K

    def start(self, bits, view):
        return {"pattern": _sign_pattern(bits, self.K), "view": view}

    def step(self, state, incoming):
        return state, self.test.alice_bits(state["view"], state["pattern"]), None


class _GapIpBob(PartyProgram):
    def __init__(self, test: SignSketchTest, K: int):
        self.test, self.K = test, K

    def start(self, bits, view):
        return {"pattern": _sign_pattern(bits, self.K), "view": view}

    def step(self, state, incoming):
        out = self.test.bob_decide(state["view"], state["pattern"], incoming)
        return state, None, out


def gap_inner_product(n: int, c: float, s: float, kappa: float = 16.0,
                      K: int = 16, label: str = "gip") -> ProtocolPair:
    """Distinguish <u, v> >= c from <= s for the hypercube embedding.

    Inputs are bit vectors x, y standing for u_i = (-1)^(x_i) / sqrt(n); the
    sketch lanes realise the correlated Gaussian rounds as K-bit sign sums,
    and Alice's T = ceil(kappa / (rho (c-s))^2) sign bits are the message.
    """
    test = SignSketchTest(c, s, kappa, n * K, K, label, 0)
    return ProtocolPair(_GapIpAlice(test, K), _GapIpBob(test, K),
                        budget_bits=-1, one_way=True,
                        meta={"protocol": "gap_inner_product", "test": test},
                        budget_fn=lambda mode: test.rounds(mode.rho))


# -- small Hamming distance ------------------------------------------------------

HD_STAGE_ERR = 1 / 8
MAX_TENSOR_CELLS = 10 ** 7


@dataclass(frozen=True)
class HdPlan:
    """Stage layout of one distance-threshold test."""

    n: int
    k: int
    full_send: bool
    t: int  # tensor order of the fine stage
    c1: float = 0.0
    s1: float = 0.0
    c2: float = 0.0
    s2: float = 0.0

    @staticmethod
    def build(n: int, k: int, dim_cap: int = MAX_TENSOR_CELLS,
              lane_budget: int | None = None) -> "HdPlan":
        """Plan for one threshold test.

        The nominal tensor order ceil(n / 10k) targets a relative gap of
        order 1/k; when that order would exceed the cell cap (or the lane
        budget protocols impose for speed) the order is reduced -- any
        order >= 2 keeps a workable gap for thresholds well below n/10, and
        the agreement-gap-based round sizing absorbs the difference.
        """
        if k > n / 20:
            return HdPlan(n, k, True, 0)
        if n > dim_cap:
            raise OverflowError(f"input length {n} exceeds the cell cap {dim_cap}")
        t_cap = max(1, int(math.log(dim_cap) // math.log(n)))
        if lane_budget is not None:
            t_cap = min(t_cap, max(1, int(math.log(lane_budget) // math.log(n))))
        t = min(math.ceil(n / (10 * max(k, 1))), t_cap) if k else \
            min(math.ceil(n / 10), t_cap)
        t = max(t, min(2, t_cap))
        c1, s1 = 1.0 - 2.0 * k / n, 0.8
        c2 = (1.0 - 2.0 * k / n) ** t
        s2 = (1.0 - 2.0 * (k + 1) / n) ** t
        return HdPlan(n, k, False, t, c1, s1, c2, s2)


def _tensor_sign_bits(bits: np.ndarray, t: int) -> np.ndarray:
    """Sign pattern of the t-fold tensor power of ((-1)^x_i) (XOR grid)."""
    out = np.asarray(bits, np.uint8)
    for _ in range(t - 1):
        out = (out[:, None] ^ np.asarray(bits, np.uint8)[None, :]).ravel()
    return out


class _HdParty(PartyProgram):
    """Both stages of the distance test, one side.

    err_target is split across the stages; each stage's rounds come from the
    arcsin gap via kappa_for_error times the caller's safety kappa.
    """

    def __init__(self, me, plan: HdPlan, err_target: float, kappa: float,
                 K: int, label: str, invert_me: bool = False,
                 salt: int = 0):
        self.me = me
        self.plan = plan
        self.err = err_target
        self.kappa = kappa
        self.K = K
        self.label = label
        self.invert_me = invert_me
        self.salt = salt

    def _tests(self, rho: float):
        p = self.plan
        e = self.err / 2.0
        k1 = self.kappa * kappa_for_error(p.c1, p.s1, rho, e)
        k2 = self.kappa * kappa_for_error(p.c2, p.s2, rho, e)
        coarse = SignSketchTest(p.c1, p.s1, k1, p.n * self.K, self.K,
                                self.label + ".coarse", self.salt)
        fine = SignSketchTest(p.c2, p.s2, k2, p.n ** p.t * self.K, self.K,
                              self.label + ".fine", self.salt)
        return coarse, fine

    def start(self, bits, view):
        bits = np.asarray(bits, np.uint8)
        if self.invert_me:
            bits = 1 - bits
        if self.plan.full_send:
            return {"bits": bits, "view": view}
        coarse, fine = self._tests(view.mode.rho)
        return {"pat1": _sign_pattern(bits, self.K),
                "pat2": _sign_pattern(_tensor_sign_bits(bits, self.plan.t), self.K),
                "view": view, "coarse": coarse, "fine": fine}

    def step(self, state, incoming):
        if self.plan.full_send:
            if self.me == ALICE:
                return state, state["bits"], None
            d = int((state["bits"] != np.asarray(incoming, np.uint8)).sum())
            return state, None, int(d <= self.plan.k)
        view = state["view"]
        if self.me == ALICE:
            msg = np.concatenate([
                state["coarse"].alice_bits(view, state["pat1"]),
                state["fine"].alice_bits(view, state["pat2"])])
            return state, msg, None
        rd = wire.Reader(incoming)
        rho = view.mode.rho
        b1 = rd.take(state["coarse"].rounds(rho))
        b2 = rd.take(state["fine"].rounds(rho))
        ok1 = state["coarse"].bob_decide(view, state["pat1"], b1)
        ok2 = state["fine"].bob_decide(view, state["pat2"], b2)
        return state, None, int(ok1 and ok2)


def hd_message_bits(plan: HdPlan, rho: float, err_target: float,
                    kappa: float) -> int:
    """Transmitted bits of one distance test at a given correlation."""
    if plan.full_send:
        return plan.n
    e = err_target / 2.0
    k1 = kappa * kappa_for_error(plan.c1, plan.s1, rho, e)
    k2 = kappa * kappa_for_error(plan.c2, plan.s2, rho, e)
    return gap_ip_rounds(plan.c1, plan.s1, rho, k1) \
        + gap_ip_rounds(plan.c2, plan.s2, rho, k2)


def small_hd(n: int, k: int, kappa: float = 1.0, dim_cap: int = MAX_TENSOR_CELLS,
             err_target: float = 2 * HD_STAGE_ERR, K: int = 16,
             label: str = "hd") -> ProtocolPair:
    """One-way test: 1 iff distance <= k, error <= err_target.

    Both stages must accept; each is amplified (by sizing its rounds from
    the arcsin gap) to err_target / 2, which at the default gives the
    1/8-per-stage layout.  k > n/20 falls back to Alice sending her input.
    """
    plan = HdPlan.build(n, k, dim_cap)
    return ProtocolPair(_HdParty(ALICE, plan, err_target, kappa, K, label),
                        _HdParty(BOB, plan, err_target, kappa, K, label),
                        budget_bits=-1, one_way=True,
                        meta={"protocol": "small_hd", "plan": plan,
                              "err_target": err_target, "kappa": kappa, "K": K},
                        budget_fn=lambda mode: hd_message_bits(
                            plan, mode.rho, err_target, kappa))


# -- threshold batteries ---------------------------------------------------------
#
# A battery answers [distance <= k] for a whole set of thresholds at once.
# The transmitted sign streams do not depend on the threshold (the pattern is
# the sender's input signs / tensor signs), so thresholds sharing a tensor
# order reuse one stream and differ only in the receiver's cutoffs.  One
# coarse stream plus one fine stream per (input flip, tensor order) pair is
# transmitted, each sized for the battery's weakest threshold.

LANE_BUDGET = 80_000  # per-round sketch lanes a stream may use


@dataclass(frozen=True)
class ThresholdTest:
    k: int
    flipped: bool  # test on complemented-x distance n - distance


class DistanceBattery:
    """Shared-stream battery of distance-threshold tests."""

    def __init__(self, n: int, tests: list[ThresholdTest], err_each: float,
                 kappa: float = 1.0, K: int = 16, label: str = "bat",
                 dim_cap: int = MAX_TENSOR_CELLS):
        self.n = n
        self.tests = list(tests)
        self.err_each = err_each
        self.kappa = kappa
        self.K = K
        self.label = label
        self.plans = {t: HdPlan.build(n, t.k, dim_cap, LANE_BUDGET)
                      for t in self.tests}
        self.full_send = any(p.full_send for p in self.plans.values())
        # streams: (flipped, "coarse") at order 1, (flipped, order) fine
        self.groups: dict[tuple, list[ThresholdTest]] = {}
        if not self.full_send:
            for t in self.tests:
                p = self.plans[t]
                self.groups.setdefault((t.flipped, "coarse"), []).append(t)
                self.groups.setdefault((t.flipped, p.t), []).append(t)

    def _stage(self, test: ThresholdTest, kind) -> tuple[float, float]:
        p = self.plans[test]
        return (p.c1, p.s1) if kind == "coarse" else (p.c2, p.s2)

    def _group_rounds(self, key, rho: float) -> int:
        e = self.err_each / 2.0
        best = 0
        for t in self.groups[key]:
            c, s = self._stage(t, key[1])
            kap = self.kappa * kappa_for_error(c, s, rho, e)
            best = max(best, gap_ip_rounds(c, s, rho, kap))
        return best

    def _group_lanes(self, key) -> int:
        order = 1 if key[1] == "coarse" else key[1]
        return self.n ** order * self.K

    def _group_keys(self):
        return sorted(self.groups, key=lambda k: (k[0], str(k[1])))

    def message_bits(self, rho: float) -> int:
        if self.full_send:
            return self.n
        if not self.tests:
            return 0
        total = sum(self._group_rounds(k, rho) for k in self._group_keys())
        return min(total, self.n)

    def _patterns(self, bits: np.ndarray, key) -> np.ndarray:
        flipped, kind = key
        base = (1 - bits) if flipped else bits
        if kind == "coarse":
            return _sign_pattern(base, self.K)
        return _sign_pattern(_tensor_sign_bits(base, kind), self.K)

    def send(self, view, bits: np.ndarray, salt: int = 0) -> np.ndarray:
        """Sender message: the input itself, or all group sign streams."""
        bits = np.asarray(bits, np.uint8)
        if self.full_send or (self.tests and self.message_bits(view.mode.rho) >= self.n):
            return bits
        rho = view.mode.rho
        parts = []
        for i, key in enumerate(self._group_keys()):
            T = self._group_rounds(key, rho)
            sk = view.sketch(f"{self.label}.g{i}s{salt}", self._group_lanes(key), T)
            parts.append(sk.sign_bits(view.party, self._patterns(bits, key),
                                      salt).astype(np.uint8))
        return np.concatenate(parts) if parts else np.zeros(0, np.uint8)

    def resolve(self, view, bits: np.ndarray, incoming: np.ndarray,
                salt: int = 0) -> dict[ThresholdTest, bool]:
        """Receiver decisions [distance(test) <= k] for every test."""
        bits = np.asarray(bits, np.uint8)
        rho = view.mode.rho
        if self.full_send or (self.tests and self.message_bits(rho) >= self.n):
            other = np.asarray(incoming, np.uint8)
            d = int((other != bits).sum())
            return {t: ((self.n - d) if t.flipped else d) <= t.k
                    for t in self.tests}
        rd = wire.Reader(incoming)
        freq: dict[tuple, float] = {}
        for i, key in enumerate(self._group_keys()):
            T = self._group_rounds(key, rho)
            sent = rd.take(T).astype(bool)
            sk = view.sketch(f"{self.label}.g{i}s{salt}", self._group_lanes(key), T)
            own = sk.sign_bits(view.party, self._patterns(bits, key), salt)
            freq[key] = float((own == sent).mean())
        out = {}
        for t in self.tests:
            p = self.plans[t]
            ok = True
            for key, (c, s) in (((t.flipped, "coarse"), (p.c1, p.s1)),
                                ((t.flipped, p.t), (p.c2, p.s2))):
                mid = 0.5 * (agreement_probability(rho, c)
                             + agreement_probability(rho, s))
                ok = ok and freq[key] >= mid
            out[t] = ok
        return out


def locate_distance(results: dict[ThresholdTest, bool], n: int) -> tuple[str, int]:
    """Interpret battery results: ("low", d), ("high", d) or ("mid", -1).

    Low-side tests at k = 0..m determine the distance exactly when it is at
    most the largest low threshold; symmetrically for complements.
    """
    low = sorted([t for t in results if not t.flipped], key=lambda t: t.k)
    for t in low:
        if results[t]:
            return "low", t.k
    high = sorted([t for t in results if t.flipped], key=lambda t: t.k)
    for t in high:
        if results[t]:
            return "high", n - t.k
    return "mid", -1


# -- strongly permutation-invariant dispatcher -----------------------------------

@dataclass(frozen=True)
class GateClass:
    """Normal form of a coordinate gate.

    count(x, y) = base(a, b, n) + lam * |x' AND y'| with x', y' the
    possibly-complemented inputs; lam = 0 means the count is a pure weight
    function.  kind is one of "const", "weight_a", "weight_b", "xor", "and".
    """

    kind: str
    flip_x: bool = False
    flip_y: bool = False
    negate: bool = False  # XNOR realised as n - distance


def classify_gate(gate: tuple[int, int, int, int]) -> GateClass:
    g00, g01, g10, g11 = gate
    lam = g11 - g10 - g01 + g00
    if len(set(gate)) == 1:
        return GateClass("const")
    if lam == 0:
        da = g10 - g00
        db = g01 - g00
        if da and db:
            raise ValueError("gate mixes both weights without interaction")
        return GateClass("weight_a" if da else "weight_b")
    if abs(lam) == 2:
        return GateClass("xor", negate=(g00 == 1))
    # exactly one cell differs from the other three; flips move it to (1, 1)
    counts = [(u, v) for u in (0, 1) for v in (0, 1)
              if gate[2 * u + v] != _majority(gate)]
    (u, v), = counts
    return GateClass("and", flip_x=(u == 0), flip_y=(v == 0),
                     negate=(gate[2 * u + v] == 0))


def _majority(gate):
    return 1 if sum(gate) >= 3 else 0


def _sigma_for_xor(desc, n) -> np.ndarray:
    """sigma as a function of the distance d, absorbing gate polarity."""
    g00 = desc.gate[0]
    sig = np.asarray(desc.sigma, dtype=np.int8)
    return sig[n - np.arange(n + 1)] if g00 == 1 else sig[np.arange(n + 1)]


def _sigma_jump_positions(values: np.ndarray) -> list[int]:
    """Positions i with values[i] != values[i + 1]."""
    return [int(i) for i in np.flatnonzero(values[:-1] != values[1:])]


class ZeroBitOutput(PartyProgram):
    def __init__(self, value_fn):
        self.value_fn = value_fn

    def start(self, bits, view):
        return {"bits": np.asarray(bits, np.uint8)}

    def step(self, state, incoming):
        return state, None, self.value_fn(state["bits"], incoming)


class _SilentAlice(PartyProgram):
    def start(self, bits, view):
        return {}

    def step(self, state, incoming):
        return state, np.zeros(0, np.uint8), None


class _OneBitAlice(PartyProgram):
    def __init__(self, value_fn):
        self.value_fn = value_fn

    def start(self, bits, view):
        return {"bits": np.asarray(bits, np.uint8)}

    def step(self, state, incoming):
        return state, wire.int_to_bits(self.value_fn(state["bits"]), 1), None


class _EchoBob(PartyProgram):
    def start(self, bits, view):
        return {}

    def step(self, state, incoming):
        return state, None, int(incoming[0])


class _BatteryAlice(PartyProgram):
    def __init__(self, battery: DistanceBattery, prefix_fn=None):
        self.battery = battery
        self.prefix_fn = prefix_fn  # optional leading fields, f(bits) -> bit array

    def start(self, bits, view):
        return {"bits": np.asarray(bits, np.uint8), "view": view}

    def step(self, state, incoming):
        prefix = (self.prefix_fn(state["bits"]) if self.prefix_fn
                  else np.zeros(0, np.uint8))
        stream = self.battery.send(state["view"], state["bits"])
        return state, np.concatenate([prefix, stream]), None


def strongly_pi(f: FunctionSpec, direction: str = ONE_WAY,
                C: float = 1.0, kappa: float = 1.0,
                K: int = 16) -> ProtocolPair:
    """Protocol for gate + symmetric-vote functions, dispatched by gate type.

    Pure-weight gates cost at most one bit.  Distance gates (XOR kind) run a
    shared-stream battery over the vote table's switch positions.  Joint
    gates (AND kind after flips) screen out inputs below the lowest switch,
    transmit Alice's weight within the remaining window, and reduce to a
    distance battery via d = a + b - 2|x AND y|.
    """
    origin = f.origin
    if origin.get("family") != "strongly_pi":
        raise ValueError("spec was not built from a gate descriptor")
    from .funcspec import StronglyPIDescriptor
    desc = StronglyPIDescriptor(tuple(origin["gate"]), tuple(origin["sigma"]))
    n = f.n
    cls = classify_gate(desc.gate)
    sigma = np.asarray(desc.sigma, dtype=np.int8)

    if cls.kind == "const":
        val = int(sigma[desc.gate[0] * n])
        return ProtocolPair(_SilentAlice(), ZeroBitOutput(lambda b, m: val),
                            budget_bits=0, one_way=True,
                            meta={"protocol": "strongly_pi", "case": "const"})
    if cls.kind == "weight_b":
        g00 = desc.gate[0]
        def bob_val(bits, _msg, g00=g00):
            b = int(bits.sum())
            count = desc.gate[1] * b + g00 * (n - b)
            return int(sigma[count])
        return ProtocolPair(_SilentAlice(), ZeroBitOutput(bob_val),
                            budget_bits=0, one_way=True,
                            meta={"protocol": "strongly_pi", "case": "weight_b"})
    if cls.kind == "weight_a":
        g00 = desc.gate[0]
        def alice_val(bits, g00=g00):
            a = int(bits.sum())
            count = desc.gate[2] * a + g00 * (n - a)
            return int(sigma[count])
        return ProtocolPair(_OneBitAlice(alice_val), _EchoBob(),
                            budget_bits=1, one_way=True,
                            meta={"protocol": "strongly_pi", "case": "weight_a"})

    if cls.kind == "xor":
        sig_d = _sigma_for_xor(desc, n)
        positions = _sigma_jump_positions(sig_d)
        if not positions:
            val = int(sig_d[0])
            return ProtocolPair(_SilentAlice(), ZeroBitOutput(lambda b, m: val),
                                budget_bits=0, one_way=True,
                                meta={"protocol": "strongly_pi", "case": "xor-const"})
        err_each = 1.0 / (12 * len(positions))
        tests = [ThresholdTest(i, False) if i <= n // 2 else
                 ThresholdTest(n - 1 - i, True) for i in positions]
        battery = DistanceBattery(n, tests, err_each, kappa, K, "spi.xor")
        def bob_out(view, bits, incoming):
            res = battery.resolve(view, bits, incoming)
            kind, d = locate_distance(res, n)
            if kind == "mid":
                lo = max((t.k for t in tests if not t.flipped), default=-1)
                d = lo + 1  # any distance between the extremes; table constant
            return int(sig_d[min(max(d, 0), n)])
        bob = _StatefulBob(bob_out)
        pair = ProtocolPair(_BatteryAlice(battery), bob, budget_bits=-1,
                            one_way=True,
                            meta={"protocol": "strongly_pi", "case": "xor",
                                  "tests": len(tests)},
                            budget_fn=lambda mode: battery.message_bits(mode.rho))
        return pair

    # AND kind: after flips the count is |x' AND y'| (or its complement)
    sig_eff = sigma[::-1].copy() if cls.negate else sigma.copy()
    positions = _sigma_jump_positions(sig_eff)
    if not positions:
        val = int(sig_eff[0])
        return ProtocolPair(_SilentAlice(), ZeroBitOutput(lambda b, m: val),
                            budget_bits=0, one_way=True,
                            meta={"protocol": "strongly_pi", "case": "and-const"})
    jmin = min(positions)
    width = max(1, math.ceil(math.log2(n - jmin + 1)))
    err_each = 1.0 / (12 * len(positions))

    def tests_for(a, b):
        """j -> (test, negate): test decides [i11 >= j + 1] given (a, b)."""
        out = {}
        lo_i11, hi_i11 = max(0, a + b - n), min(a, b)
        for j in positions:
            if lo_i11 <= j and j + 1 <= hi_i11:
                k = a + b - 2 * (j + 1) + 1  # [d <= k] <=> [i11 >= j + 1]
                if k <= n // 2:
                    out[j] = (ThresholdTest(k, False), False)
                else:
                    # flipped test answers [n - d <= n - k - 1] = [d > k]
                    out[j] = (ThresholdTest(n - k - 1, True), True)
        return out

    all_tests = set()
    for a in range(jmin + 1, n + 1):
        for b in range(jmin + 1, n + 1):
            all_tests.update(t for t, _neg in tests_for(a, b).values())
    tests = sorted(all_tests, key=lambda t: (t.flipped, t.k))
    battery = DistanceBattery(n, tests, err_each, kappa, K, "spi.and")

    class _AndAlice(PartyProgram):
        def start(self, bits, view):
            bits = np.asarray(bits, np.uint8)
            if cls.flip_x:
                bits = 1 - bits
            return {"bits": bits, "view": view}

        def step(self, state, incoming):
            a = int(state["bits"].sum())
            if a <= jmin:
                return state, wire.int_to_bits(0, 1), None
            prefix = np.concatenate([wire.int_to_bits(1, 1),
                                     wire.int_to_bits(a - jmin - 1, width)])
            stream = battery.send(state["view"], state["bits"])
            return state, np.concatenate([prefix, stream]), None

    class _AndBob(PartyProgram):
        def start(self, bits, view):
            bits = np.asarray(bits, np.uint8)
            if cls.flip_y:
                bits = 1 - bits
            return {"bits": bits, "view": view}

        def step(self, state, incoming):
            rd = wire.Reader(incoming)
            screened = rd.take_int(1)
            b = int(state["bits"].sum())
            if not screened or b <= jmin:
                return state, None, int(sig_eff[jmin])
            a = rd.take_int(width) + jmin + 1
            relevant = tests_for(a, b)
            lo_i11 = max(0, a + b - n)
            if not relevant:
                return state, None, int(sig_eff[lo_i11])
            res = battery.resolve(state["view"], state["bits"],
                                  rd.bits[rd.pos:])
            i11 = lo_i11  # below every reachable switch position
            for j in sorted(relevant, reverse=True):
                test, neg = relevant[j]
                if res[test] ^ neg:  # i11 >= j + 1
                    i11 = j + 1
                    break
            return state, None, int(sig_eff[i11])

    def budget_fn(mode):
        return 1 + width + battery.message_bits(mode.rho)

    return ProtocolPair(_AndAlice(), _AndBob(), budget_bits=-1, one_way=True,
                        meta={"protocol": "strongly_pi", "case": "and",
                              "tests": len(tests), "jmin": jmin},
                        budget_fn=budget_fn)


class _StatefulBob(PartyProgram):
    def __init__(self, fn):
        self.fn = fn

    def start(self, bits, view):
        return {"bits": np.asarray(bits, np.uint8), "view": view}

    def step(self, state, incoming):
        return state, None, self.fn(state["view"], state["bits"], incoming)


# -- constructive seed-table derandomisation --------------------------------------

@dataclass(frozen=True)
class NewmanTable:
    """A verified table of shared seeds replacing public randomness."""

    domain_size: int
    seeds: tuple[int, ...]
    base_error: float      # measured max per-input error of the base
    eps_out: float         # verified max per-input error of the seed average

    @property
    def index_bits(self) -> int:
        return max(1, math.ceil(math.log2(len(self.seeds)))) \
            if len(self.seeds) > 1 else 0


def _quick_run(alice, bob, pair, mode, session):
    """Minimal session loop (no transcripts) for verification sweeps."""
    from .randomness import PartyView
    sa = alice.start(pair.x, PartyView(mode, session, ALICE))
    sb = bob.start(pair.y, PartyView(mode, session, BOB))
    incoming = None
    turn = ALICE
    for _ in range(64):
        if turn == ALICE:
            sa, msg, out = alice.step(sa, incoming)
        else:
            sb, msg, out = bob.step(sb, incoming)
        if out is not None:
            return out
        incoming = msg
        turn = BOB if turn == ALICE else ALICE
    raise ProtocolError("verification run did not terminate")


def newman_seed_count(domain_size: int, eps: float) -> int:
    return math.ceil(2.0 * math.log(2.0 * domain_size) / eps ** 2)


def newmanize(base: ProtocolPair, domain: list, eps: float,
              delta: float = 0.05, seed: int = 0,
              baseline_trials: int = 800,
              max_attempts: int = 10) -> tuple[NewmanTable, ProtocolPair]:
    """Replace the base protocol's shared randomness by a verified seed table.

    ``domain`` lists (InputPair, expected) over the base's whole (finite)
    input domain.  The base's per-input error is measured empirically
    (``baseline_trials`` runs per input; ``delta`` is the confidence budget
    for that estimate), then seed tables of size 2 ln(2 |D|) / eps^2 are
    sampled and exhaustively verified until the seed-averaged error is at
    most e0 + eps on every input.  The runtime protocol costs an extra
    index message of ceil(log2 t) bits: Alice picks a table entry with her
    private randomness and both parties run the base with that shared seed.
    """
    if len(domain) > 1 << 16:
        raise ValueError("domain too large for exhaustive verification")
    dsize = len(domain)
    t = newman_seed_count(dsize, eps)
    base_stream = rng.stream_key("newman.baseline")
    e0 = 0.0
    for i, (pair, expected) in enumerate(domain):
        errs = 0
        for trial in range(baseline_trials):
            mode = RandomnessMode.perfect(
                rng.keyed_word(seed, base_stream, i * baseline_trials + trial))
            errs += _quick_run(base.alice, base.bob, pair, mode, mode.seed) != expected
        e0 = max(e0, errs / baseline_trials)

    table_stream = rng.stream_key("newman.table")
    for attempt in range(max_attempts):
        seeds = [rng.keyed_word(seed, table_stream, attempt * t + s)
                 for s in range(t)]
        worst = 0.0
        ok = True
        for pair, expected in domain:
            errs = 0
            for s in seeds:
                mode = RandomnessMode.perfect(s)
                errs += _quick_run(base.alice, base.bob, pair, mode, s) != expected
            rate = errs / t
            worst = max(worst, rate)
            if rate > e0 + eps:
                ok = False
                break
        if ok:
            table = NewmanTable(dsize, tuple(seeds), e0, worst)
            return table, _derandomized_pair(base, table)
    raise RuntimeError(
        f"seed-table verification failed {max_attempts} times; eps too small "
        f"for the trial budget (base error {e0:.3f})")


def _derandomized_pair(base: ProtocolPair, table: NewmanTable) -> ProtocolPair:
    width = table.index_bits

    class _DerandAlice(PartyProgram):
        def start(self, bits, view):
            if width:
                word = int(view.private_words("newman.pick", 1)[0])
                idx = word % len(table.seeds)
            else:
                idx = 0
            s = table.seeds[idx]
            from .randomness import PartyView
            inner_view = PartyView(RandomnessMode.perfect(s), s, ALICE)
            return {"idx": idx,
                    "inner": base.alice.start(bits, inner_view),
                    "sent_idx": False}

        def step(self, state, incoming):
            inner, msg, out = base.alice.step(state["inner"], incoming)
            state["inner"] = inner
            if not state["sent_idx"]:
                state["sent_idx"] = True
                prefix = wire.int_to_bits(state["idx"], width)
                msg = prefix if msg is None else np.concatenate([prefix, msg])
            return state, msg, out

    class _DerandBob(PartyProgram):
        def start(self, bits, view):
            return {"bits": np.asarray(bits, np.uint8), "inner": None}

        def step(self, state, incoming):
            if state["inner"] is None:
                rd = wire.Reader(incoming)
                idx = rd.take_int(width) if width else 0
                s = table.seeds[idx]
                from .randomness import PartyView
                inner_view = PartyView(RandomnessMode.perfect(s), s, BOB)
                state["inner"] = base.bob.start(state["bits"], inner_view)
                incoming = rd.bits[rd.pos:]
            inner, msg, out = base.bob.step(state["inner"], incoming)
            state["inner"] = inner
            return state, msg, out

    budget = base.budget_bits + width if base.budget_bits >= 0 else -1
    return ProtocolPair(_DerandAlice(), _DerandBob(), budget_bits=budget,
                        one_way=base.one_way,
                        meta={"protocol": "newmanized",
                              "inner": base.meta.get("protocol"),
                              "index_bits": width})


# -- the full region protocol ------------------------------------------------------

def region_label(n: int, a: int, b: int, ck: float, direction: str) -> str:
    """Region of the weight pair (a, b) given the scale C*k."""
    A, B = min(a, n - a), min(b, n - b)
    big = min(2.0 ** ck, float(n + 1))
    if direction == TWO_WAY:
        if (A <= ck and B <= big) or (A <= big and B <= ck):
            return "I"
        if (A <= ck and B > big) or (A > big and B <= ck):
            return "II"
        if A > ck and B > ck and abs(A - B) < ck:
            return "III"
        return "IV"
    if A <= ck:
        return "I" if B <= big else "II"
    return "III" if abs(A - B) < ck else "IV"


def hash_width(pairs: int, err: float, rho_eff: float) -> int:
    """Hash bits so that `pairs` comparisons all behave, via KL exponents."""
    if rho_eff <= 0.05:
        raise ValueError("hash-based tests need correlation above 0.05")
    tau = 0.5 - rho_eff / 4.0
    qm = (1.0 - rho_eff) / 2.0

    def dkl(p, q):
        return p * math.log(p / q) + (1 - p) * math.log((1 - p) / (1 - q))

    exponent = dkl(tau, 0.5)
    if qm > 0:
        exponent = min(exponent, dkl(tau, qm))
    return max(8, math.ceil((math.log(max(2, pairs)) + math.log(1.0 / err))
                            / exponent))


@dataclass
class FullIsrPlan:
    """Classification scale and per-region consistency data."""

    f: FunctionSpec
    direction: str
    C: float
    k: int
    escalated: bool

    @property
    def ck(self) -> float:
        return self.C * self.k

    @property
    def n(self) -> int:
        return self.f.n

    def battery_tests(self) -> list[ThresholdTest]:
        m = math.floor(self.ck)
        return ([ThresholdTest(i, False) for i in range(m + 1)]
                + [ThresholdTest(j, True) for j in range(m + 1)])


def _classification_violations(f: FunctionSpec, direction: str, ck: float) -> int:
    """Slices whose shape contradicts their region's protocol assumption."""
    n = f.n
    bad = 0
    for a in range(n + 1):
        for b in range(n + 1):
            label = region_label(n, a, b, ck, direction)
            table = f.slice_table(a, b)
            vals = {v for v in table.values() if v is not None}
            if label in ("II", "IV"):
                bad += len(vals) > 1
            elif label == "III":
                for j in slice_jumps(table):
                    if ck < j.c < n - ck:
                        bad += 1
                        break
    return bad


def full_isr_plan(f: FunctionSpec, direction: str, C: float = 1.0,
                  k_override: int | None = None) -> FullIsrPlan:
    """Choose the classification scale, escalating past unsafe values.

    The measure-derived k can leave a region II/IV slice distance-dependent
    in boundary cases; the plan raises k minimally until every region's
    assumption holds (always terminates: once 2^(Ck) exceeds n/2 only
    regions I and II remain and II requires an impossible weight).  An
    explicit k_override skips escalation and fails fast instead.
    """
    if not f.is_total:
        raise ValueError("the region protocol requires a total function")
    if k_override is not None:
        if _classification_violations(f, direction, C * k_override):
            raise ValueError(
                f"k = {k_override} leaves a distance-dependent region II/IV "
                "slice (wrong k or inconsistent measure)")
        return FullIsrPlan(f, direction, C, k_override, False)
    raw = measure(f, direction).raw_value
    k0 = max(1, math.ceil(raw / C))
    k = k0
    while _classification_violations(f, direction, C * k):
        k += 1
        if C * k > f.n:
            raise RuntimeError("no safe classification scale found")
    return FullIsrPlan(f, direction, C, k, k > k0)


_REGION_ERR = 1 / 24  # failure budget of each hash-based classification aid


class _FullIsrState:
    """Shared helpers for both sides of the region protocol."""

    def __init__(self, plan: FullIsrPlan, kappa: float, K: int):
        self.plan = plan
        self.kappa = kappa
        self.K = K
        n = plan.n
        ck = plan.ck
        self.w_ck = max(1, math.ceil(math.log2(math.floor(ck) + 1))) \
            if math.floor(ck) >= 1 else 1
        self.w_mod = max(1, math.ceil(math.log2(2 * math.ceil(ck))))
        self.w_n = max(1, math.ceil(math.log2(n + 1)))
        tests = plan.battery_tests()
        self.battery = DistanceBattery(n, tests, 1.0 / (12 * len(tests)),
                                       kappa, K, "fisr.bat") if tests else None

    def r_ssi(self, rho_eff: float) -> int:
        bound_a = max(1, math.floor(self.plan.ck))
        bound_b = max(2, min(self.plan.n,
                             math.ceil(2.0 ** self.plan.ck)))
        return hash_width(bound_a * bound_b, _REGION_ERR, rho_eff)

    def r_interval(self, rho_eff: float) -> int:
        return hash_width(max(2, 2 * math.ceil(self.plan.ck)), _REGION_ERR,
                          rho_eff)

    def interval_members(self, B: int) -> np.ndarray:
        ck = self.plan.ck
        n = self.plan.n
        return np.array([j for j in range(n + 1) if abs(j - B) < ck])

    def mid_value(self, A: int, B: int, fa: bool, fb: bool):
        """Slice value on the middle distance range (constant by the plan)."""
        n = self.plan.n
        ck = self.plan.ck
        ds = [d for d in valid_distances(n, A, B) if ck < d < n - ck]
        pool = ds or list(valid_distances(n, A, B))
        d = int(pool[len(pool) // 2])
        return self.plan.f.value_flipped(A, B, d, fa, fb)

    def value_at(self, A: int, B: int, d: int, fa: bool, fb: bool):
        n = self.plan.n
        if d in valid_distances(n, A, B):
            v = self.plan.f.value_flipped(A, B, d, fa, fb)
            if v is not None:
                return v
        return self.mid_value(A, B, fa, fb)

    def const_value(self, A: int, B: int, fa: bool, fb: bool):
        ds = valid_distances(self.plan.n, A, B)
        return self.plan.f.value_flipped(A, B, int(ds[0]), fa, fb)


class _FullIsrAlice(PartyProgram):
    def __init__(self, shared: _FullIsrState, direction: str):
        self.sh = shared
        self.direction = direction

    def start(self, bits, view):
        bits = np.asarray(bits, np.uint8)
        n = self.sh.plan.n
        fa = int(bits.sum()) > n / 2
        if fa:
            bits = 1 - bits
        return {"bits": bits, "view": view, "fa": fa, "A": int(bits.sum()),
                "phase": "classify"}

    def _region_i_ii_message(self, state, include_hashes: bool):
        sh = self.sh
        view = state["view"]
        parts = [wire.int_to_bits(state["A"], sh.w_ck)]
        if include_hashes:
            r = sh.r_ssi(view.mode.effective_rho)
            supp = np.flatnonzero(state["bits"])
            packed = view.hash_packed("fisr.ssi", sh.plan.n, r, supp)
            parts += [rng.unpack_bits(row, r) for row in packed]
        return np.concatenate(parts)

    def _region_iii_iv_message(self, state):
        sh = self.sh
        view = state["view"]
        r = sh.r_interval(view.mode.effective_rho)
        parts = [rsi_send(view, "fisr.int", sh.plan.n + 1, r, state["A"]),
                 wire.int_to_bits(state["A"] % (2 * math.ceil(sh.plan.ck)),
                                  sh.w_mod)]
        if sh.battery is not None:
            parts.append(sh.battery.send(view, state["bits"]))
        parts.append(wire.int_to_bits(state["A"], sh.w_n))
        return np.concatenate(parts)

    def step(self, state, incoming):
        sh = self.sh
        ck = sh.plan.ck
        A = state["A"]
        if self.direction == ONE_WAY:
            head = [wire.int_to_bits(state["fa"], 1),
                    wire.int_to_bits(int(A <= ck), 1)]
            if A <= ck:
                body = self._region_i_ii_message(state, include_hashes=True)
            else:
                body = self._region_iii_iv_message(state)
            return state, np.concatenate(head + [body]), None

        big = min(2.0 ** ck, float(sh.plan.n + 1))
        if state["phase"] == "classify":
            state["phase"] = "route"
            msg = np.concatenate([wire.int_to_bits(state["fa"], 1),
                                  wire.int_to_bits(int(A <= ck), 1),
                                  wire.int_to_bits(int(A <= big), 1)])
            return state, msg, None
        if state["phase"] == "route":
            rd = wire.Reader(incoming)
            state["fb"] = bool(rd.take_int(1))
            b1, b2 = rd.take_int(1), rd.take_int(1)
            state["B_le_ck"], state["B_le_big"] = bool(b1), bool(b2)
            a_le_ck, a_le_big = A <= ck, A <= big
            if a_le_ck or b1:  # regions I / II, sender = the small-weight side
                if a_le_ck:
                    state["phase"] = "await_receiver"
                    inc_h = state["B_le_big"]  # region I iff B <= 2^ck
                    return state, self._region_i_ii_message(state, inc_h), None
                state["phase"] = "expect_sender_value"
                return state, np.zeros(0, np.uint8), None
            state["phase"] = "await_interval"
            r = sh.r_interval(state["view"].mode.effective_rho)
            return state, rsi_send(state["view"], "fisr.int", sh.plan.n + 1,
                                   r, A), None
        if state["phase"] == "expect_sender_value":
            # Bob transmitted: he is the small side; Alice evaluates
            rd = wire.Reader(incoming)
            B = rd.take_int(sh.w_ck)
            if A <= big:  # region I: hashes follow, count the matches
                r = sh.r_ssi(state["view"].mode.effective_rho)
                packed = _pack_hash_rows(rd.take(B * r), B, r)
                i11 = _hash_match_count(state["view"], "fisr.ssi", sh.plan.n,
                                        r, np.flatnonzero(state["bits"]),
                                        packed,
                                        state["view"].mode.effective_rho)
                d = A + B - 2 * i11
                return state, None, sh.value_at(A, B, d, state["fa"], state["fb"])
            return state, None, sh.const_value(A, B, state["fa"], state["fb"])
        if state["phase"] == "await_interval":
            rd = wire.Reader(incoming)
            in_iii = bool(rd.take_int(1))
            msg = [wire.int_to_bits(A % (2 * math.ceil(ck)), sh.w_mod)]
            if in_iii and sh.battery is not None:
                msg.append(sh.battery.send(state["view"], state["bits"]))
            if not in_iii:
                msg.append(wire.int_to_bits(A, sh.w_n))
            state["phase"] = "done"
            return state, np.concatenate(msg), None
        raise ProtocolError("unexpected turn")


class _FullIsrBob(PartyProgram):
    def __init__(self, shared: _FullIsrState, direction: str):
        self.sh = shared
        self.direction = direction

    def start(self, bits, view):
        bits = np.asarray(bits, np.uint8)
        n = self.sh.plan.n
        fb = int(bits.sum()) > n / 2
        if fb:
            bits = 1 - bits
        return {"bits": bits, "view": view, "fb": fb, "B": int(bits.sum()),
                "phase": "classify"}

    def _receive_i_ii(self, state, rd, fa: bool, region_i: bool):
        sh = self.sh
        A = rd.take_int(sh.w_ck)
        B = state["B"]
        if region_i:
            r = sh.r_ssi(state["view"].mode.effective_rho)
            packed = _pack_hash_rows(rd.take(A * r), A, r)
            i11 = _hash_match_count(state["view"], "fisr.ssi", sh.plan.n, r,
                                    np.flatnonzero(state["bits"]), packed,
                                    state["view"].mode.effective_rho)
            d = A + B - 2 * i11
            return sh.value_at(A, B, d, fa, state["fb"])
        return sh.const_value(A, B, fa, state["fb"])

    def _receive_iii_iv(self, state, rd, fa: bool):
        sh = self.sh
        view = state["view"]
        B = state["B"]
        n, ck = sh.plan.n, sh.plan.ck
        r = sh.r_interval(view.mode.effective_rho)
        hash_bits = rd.take(r)
        in_iii = rsi_member(view, "fisr.int", n + 1, r,
                            self.sh.interval_members(B), hash_bits)
        a_mod = rd.take_int(sh.w_mod)
        if in_iii:
            M = 2 * math.ceil(ck)
            cands = [j for j in range(n + 1) if j % M == a_mod
                     and abs(j - B) < ck]
            A = cands[0] if cands else (B if B <= n else n)
            if sh.battery is not None:
                res = sh.battery.resolve(view, state["bits"],
                                         rd.take(sh.battery.message_bits(view.mode.rho)))
                kind, d = locate_distance(res, n)
            else:
                kind, d = "mid", -1
            if kind == "mid":
                return sh.mid_value(A, B, fa, state["fb"])
            return sh.value_at(A, B, d, fa, state["fb"])
        if sh.battery is not None:
            rd.take(sh.battery.message_bits(view.mode.rho))  # skip battery
        A = rd.take_int(sh.w_n)
        return sh.const_value(A, B, fa, state["fb"])

    def step(self, state, incoming):
        sh = self.sh
        ck = sh.plan.ck
        B = state["B"]
        if self.direction == ONE_WAY:
            rd = wire.Reader(incoming)
            fa = bool(rd.take_int(1))
            a_le_ck = bool(rd.take_int(1))
            big = min(2.0 ** ck, float(sh.plan.n + 1))
            if a_le_ck:
                return state, None, self._receive_i_ii(state, rd, fa,
                                                       region_i=(B <= big))
            return state, None, self._receive_iii_iv(state, rd, fa)

        big = min(2.0 ** ck, float(sh.plan.n + 1))
        if state["phase"] == "classify":
            rd = wire.Reader(incoming)
            state["fa"] = bool(rd.take_int(1))
            state["a_le_ck"] = bool(rd.take_int(1))
            state["a_le_big"] = bool(rd.take_int(1))
            state["phase"] = "route"
            msg = np.concatenate([wire.int_to_bits(state["fb"], 1),
                                  wire.int_to_bits(int(B <= ck), 1),
                                  wire.int_to_bits(int(B <= big), 1)])
            return state, msg, None
        if state["phase"] == "route":
            if state["a_le_ck"]:
                rd = wire.Reader(incoming)
                region_i = B <= big
                return state, None, self._receive_i_ii(state, rd, state["fa"],
                                                       region_i)
            if B <= ck:  # Bob is the small side and transmits
                inc_h = state["a_le_big"]  # region I iff A <= 2^ck
                parts = [wire.int_to_bits(B, sh.w_ck)]
                if inc_h:
                    r = sh.r_ssi(state["view"].mode.effective_rho)
                    supp = np.flatnonzero(state["bits"])
                    packed = state["view"].hash_packed("fisr.ssi", sh.plan.n,
                                                       r, supp)
                    parts += [rng.unpack_bits(row, r) for row in packed]
                state["phase"] = "done"
                return state, np.concatenate(parts), None
            # regions III / IV: answer the interval test
            rd = wire.Reader(incoming)
            r = sh.r_interval(state["view"].mode.effective_rho)
            in_iii = rsi_member(state["view"], "fisr.int", sh.plan.n + 1, r,
                                sh.interval_members(B), rd.take(r))
            state["in_iii"] = in_iii
            state["phase"] = "finish"
            return state, wire.int_to_bits(int(in_iii), 1), None
        if state["phase"] == "finish":
            rd = wire.Reader(incoming)
            a_mod = rd.take_int(sh.w_mod)
            n = sh.plan.n
            if state["in_iii"]:
                M = 2 * math.ceil(ck)
                cands = [j for j in range(n + 1) if j % M == a_mod
                         and abs(j - B) < ck]
                A = cands[0] if cands else B
                if sh.battery is not None:
                    stream = rd.bits[rd.pos:]
                    res = sh.battery.resolve(state["view"], state["bits"], stream)
                    kind, d = locate_distance(res, n)
                else:
                    kind, d = "mid", -1
                if kind == "mid":
                    return state, None, sh.mid_value(A, B, state["fa"], state["fb"])
                return state, None, sh.value_at(A, B, d, state["fa"], state["fb"])
            A = rd.take_int(sh.w_n)
            return state, None, sh.const_value(A, B, state["fa"], state["fb"])
        raise ProtocolError("unexpected turn")


def full_isr(f: FunctionSpec, direction: str = TWO_WAY, C: float = 1.0,
             k_override: int | None = None, kappa: float = 1.0,
             K: int = 16) -> ProtocolPair:
    """Region protocol for an arbitrary total permutation-invariant function.

    Both parties normalise their weights below n/2 by complementing (one bit
    each); the weight plane is split by the scale C*k into four regions
    handled by set-intersection hashing, a constant-slice lookup, a shared
    distance battery, or a weight message (derandomised seed-table style;
    the default weight protocol is the deterministic send-the-weight one,
    flagged in meta).  One-way mode sends the messages for every region
    Alice cannot rule out and Bob selects using his weight.
    """
    plan = full_isr_plan(f, direction, C, k_override)
    shared = _FullIsrState(plan, kappa, K)
    alice = _FullIsrAlice(shared, direction)
    bob = _FullIsrBob(shared, direction)

    def budget_fn(mode):
        rho_eff = mode.effective_rho
        bat = shared.battery.message_bits(mode.rho) if shared.battery else 0
        r_ssi = shared.r_ssi(rho_eff)
        max_small = math.floor(plan.ck)
        branch_small = shared.w_ck + max_small * r_ssi
        branch_big = shared.r_interval(rho_eff) + shared.w_mod + bat + shared.w_n
        if direction == ONE_WAY:
            return 2 + max(branch_small, branch_big)
        return 6 + max(branch_small, 1 + branch_big)

    return ProtocolPair(alice, bob, budget_bits=-1,
                        one_way=(direction == ONE_WAY),
                        meta={"protocol": "full_isr", "k": plan.k,
                              "C": C, "escalated": plan.escalated,
                              "weight_protocol": "trivial"},
                        budget_fn=budget_fn)

