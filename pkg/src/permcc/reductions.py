"""Executable padding reductions onto exact-gap Hamming-distance targets.

Each reduction maps instances of a canonical hard problem (unique
disjointness, set inclusion, sparse indexing) onto inputs of a target
eGHD(n, a, b, c, g): repeat every source coordinate g times, append a fixed
pad of shared / one-sided ones, then zero-fill to length n.  The pad is a
:class:`PaddingPlan`: Alice gains A ones, Bob gains B ones, the distance
grows by exactly C, using (A + B + C) / 2 fresh coordinates of which
(A + B - C) / 2 carry a shared one.

Targets are weight-normalised first (complement inputs so a, b <= n/2, then
swap roles so a <= b); the recorded flips are re-applied to every mapped
instance, so contracts are checked against the *original* target.  Formula
outputs t, w are floored and feasibility re-checked; infeasible targets give
None from the parameter helpers and ValueError from the map constructors.

Instance labels are the target's exact-gap value: label 1 means the mapped
pair must land on distance c + g, label 0 on c - g.  The source problem's
own positive outcome (intersecting / included / member) is the *small*
distance, i.e. label 0.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .funcspec import InputPair


@dataclass(frozen=True)
class PaddingPlan:
    """Append A ones to x, B ones to y, raising the distance by exactly C."""

    A: int
    B: int
    C: int

    def __post_init__(self):
        if min(self.A, self.B, self.C) < 0:
            raise ValueError("pad counts must be nonnegative")
        if not abs(self.A - self.B) <= self.C <= self.A + self.B:
            raise ValueError(f"distance increase {self.C} out of range for "
                             f"A={self.A}, B={self.B}")
        if (self.A + self.B - self.C) % 2:
            raise ValueError("A + B - C must be even")

    @property
    def shared(self) -> int:
        return (self.A + self.B - self.C) // 2

    @property
    def coords(self) -> int:
        return (self.A + self.B + self.C) // 2

    def pad_bits(self) -> tuple[np.ndarray, np.ndarray]:
        s = self.shared
        x = np.concatenate([np.ones(s, np.uint8),
                            np.ones(self.A - s, np.uint8),
                            np.zeros(self.B - s, np.uint8)])
        y = np.concatenate([np.ones(s, np.uint8),
                            np.zeros(self.A - s, np.uint8),
                            np.ones(self.B - s, np.uint8)])
        return x, y


def padding_plan(A: int, B: int, C: int) -> PaddingPlan:
    return PaddingPlan(A, B, C)


def repeat_and_pad(x: np.ndarray, y: np.ndarray, g: int,
                   plan: PaddingPlan) -> tuple[np.ndarray, np.ndarray]:
    """Duplicate each coordinate g times, then append the plan's pad."""
    x = np.asarray(x, np.uint8)
    y = np.asarray(y, np.uint8)
    px, py = plan.pad_bits()
    return (np.concatenate([np.repeat(x, g), px]),
            np.concatenate([np.repeat(y, g), py]))


def _normalize(target):
    """Flips making a <= b <= n/2; returns ((n,a,b,c,g), flip_x, flip_y, swap)."""
    n, a, b, c, g = target
    flip_x = a > n / 2
    if flip_x:
        a, c = n - a, n - c
    flip_y = b > n / 2
    if flip_y:
        b, c = n - b, n - c
    swap = a > b
    if swap:
        a, b = b, a
    return (n, a, b, c, g), flip_x, flip_y, swap


def _check_target(target):
    n, a, b, c, g = target
    if g < 1:
        raise ValueError("gap g must be >= 1")
    lo, hi = abs(a - b), min(a + b, 2 * n - a - b)
    if not (lo <= c - g and c + g <= hi and (c + g - lo) % 2 == 0):
        raise ValueError(f"target {target} has unreachable gap distances")


def _plan_or_none(A, B, C) -> PaddingPlan | None:
    try:
        return PaddingPlan(A, B, C)
    except ValueError:
        return None


# -- parameter formulas (also consumed by measure.certificate) ----------------

def udisj_params(target) -> dict | None:
    """Unique-disjointness source parameter t for a target, or None."""
    (n, a, b, c, g) = _normalize(target)[0]
    t = min((c - b + a + g) // (2 * g), (n - c - g) // (2 * g), a // g, b // g)
    if t < 1:
        return None
    plan = _plan_or_none(a - g * t, b - g * t, (c + g) - 2 * g * t)
    if plan is None or 3 * t * g + plan.coords > n:
        return None
    return {"t": t}


def setinc_params(target) -> dict | None:
    """Set-inclusion source parameters (t, w) for a target, or None."""
    (n, a, b, c, g) = _normalize(target)[0]
    t = (a + b - c + g) // (2 * g)
    w = (c + b - a - g) // (2 * g)
    if t < 1 or w < 1 or a - g * t < 0 or b - g * (t + w) < 0:
        return None
    plan = _plan_or_none(a - g * t, b - g * (t + w), (c - g) - g * w)
    if plan is None or (2 * t + w) * g + plan.coords > n:
        return None
    return {"t": t, "w": w}


def sparse_indexing_params(target, mode: str = "ic") -> dict | None:
    """Sparse-indexing source parameter t for a target, or None.

    mode "ic": the Hadamard-composed source (weight-2^t codeword against a
    singleton), claimed bound t on the log scale.  mode "one_way": pad a
    plain weight-(t, 1) instance directly.
    """
    (n, a, b, c, g) = _normalize(target)[0]
    if mode == "one_way":
        t = min((c - b + a + g) // (2 * g), (n - c - g) // (2 * g), a // g)
        if t < 1 or b - g < 0:
            return None
        plan = _plan_or_none(a - g * t, b - g, (c + g) - 2 * g * t)
        if plan is None or 2 * t * g + plan.coords > n:
            return None
        return {"t": t, "mode": "one_way"}
    if mode != "ic":
        raise ValueError("mode must be 'ic' or 'one_way'")
    num1 = (c + b - a + g) // (2 * g)
    num2 = (n - c - g) // (2 * g)
    if min(num1, num2) < 2:
        return None
    t = int(math.floor(math.log2(min(num1, num2))))
    while t >= 1:
        pw = 1 << t
        if a - g >= 0 and b - g * pw >= 0:
            plan = _plan_or_none(a - g, b - g * pw, (c - g) - g * (pw - 1))
            if plan is not None and 2 * pw * g + plan.coords <= n:
                return {"t": t, "mode": "ic"}
        t -= 1
    return None


# -- instance maps -------------------------------------------------------------

@dataclass
class ReductionInstanceMap:
    """Executable map from source-problem instances to target inputs."""

    source_family: str
    source_params: dict
    source_length: int
    target: tuple[int, int, int, int, int]
    g: int
    plan: PaddingPlan
    flip_x: bool
    flip_y: bool
    swap: bool
    claimed_bound: int
    # label (= target exact-gap value) -> distance at the normalised target
    label_distance: dict[int, int] = field(default_factory=dict)

    def apply(self, x: np.ndarray, y: np.ndarray) -> InputPair:
        """Map one source instance to an input pair of the original target."""
        n = self.target[0]
        xt, yt = repeat_and_pad(x, y, self.g, self.plan)
        if len(xt) > n:
            raise ValueError("mapped instance exceeds target length")
        xt = np.concatenate([xt, np.zeros(n - len(xt), np.uint8)])
        yt = np.concatenate([yt, np.zeros(n - len(yt), np.uint8)])
        if self.swap:
            xt, yt = yt, xt
        if self.flip_x:
            xt = 1 - xt
        if self.flip_y:
            yt = 1 - yt
        return InputPair(xt, yt)

    def expected_distance(self, label: int) -> int:
        """Distance the mapped pair realises at the original target."""
        d = self.label_distance[label]
        if self.flip_x:
            d = self.target[0] - d
        if self.flip_y:
            d = self.target[0] - d
        return d

    def _counts(self) -> int:
        m, p = self.source_length, self.source_params
        return sum(math.comb(m, p["wx"]) * math.comb(p["wx"], i11)
                   * math.comb(m - p["wx"], p["wy"] - i11)
                   for i11 in p["labels"].values())

    def source_instances(self, limit: int = 20000, seed: int = 7):
        """Yield (x, y, label) source instances.

        Everything is enumerated when the instance count is within ``limit``;
        beyond that, one canonical representative per label plus a seeded
        uniform sample is produced.  The map acts coordinatewise, so image
        weights and distances depend on the source only through its weights
        and distance, which every representative already exercises.
        """
        m, p = self.source_length, self.source_params
        wx, wy, labels = p["wx"], p["wy"], p["labels"]
        if self._counts() <= limit:
            for supp_x in itertools.combinations(range(m), wx):
                x = np.zeros(m, np.uint8)
                x[list(supp_x)] = 1
                rest = [i for i in range(m) if not x[i]]
                for label, i11 in labels.items():
                    for inside in itertools.combinations(supp_x, i11):
                        for outside in itertools.combinations(rest, wy - i11):
                            y = np.zeros(m, np.uint8)
                            y[list(inside)] = 1
                            y[list(outside)] = 1
                            yield x, y, label
            return
        stream = rng.stream_key("reduction.sample")
        count = 0
        for label, i11 in labels.items():
            x = np.zeros(m, np.uint8)
            x[:wx] = 1
            y = np.zeros(m, np.uint8)
            y[:i11] = 1
            y[wx:wx + wy - i11] = 1
            yield x, y, label
            count += 1
        base = 0
        while count < limit:
            words = rng.keyed_words(seed, stream,
                                    np.arange(base, base + 2 * m, dtype=np.uint64))
            base += 2 * m
            perm = np.argsort(words[:m], kind="stable")
            label = sorted(labels)[count % len(labels)]
            i11 = labels[label]
            supp_x = perm[:wx]
            rest = perm[wx:]
            sub = np.argsort(words[m:m + wx], kind="stable")[:i11]
            sub2 = np.argsort(words[m + wx:m + wx + len(rest)], kind="stable")
            x = np.zeros(m, np.uint8)
            x[supp_x] = 1
            y = np.zeros(m, np.uint8)
            y[supp_x[sub]] = 1
            y[rest[sub2[:wy - i11]]] = 1
            yield x, y, label
            count += 1

    def check_contract(self, limit: int = 20000, spec=None) -> tuple[int, int]:
        """Verify weights, distance and label fidelity for source instances.

        Returns (checked, violations).  When ``spec`` is the exact-gap
        FunctionSpec of the target, each mapped pair is also evaluated and
        must reproduce the instance label.
        """
        n, a, b, c, g = self.target
        checked = violations = 0
        for x, y, label in self.source_instances(limit):
            pair = self.apply(x, y)
            ok = (pair.weight_x == a and pair.weight_y == b
                  and pair.distance == self.expected_distance(label))
            if ok and spec is not None:
                ok = spec.eval(pair) == label
            checked += 1
            violations += not ok
        return checked, violations


def reduce_from_udisj(target) -> ReductionInstanceMap:
    """Unique-disjointness instances (weight t over 3t coords) onto a target."""
    _check_target(target)
    params = udisj_params(target)
    if params is None:
        raise ValueError(f"UDISJ reduction infeasible for target {target}")
    t = params["t"]
    (n, a, b, c, g), flip_x, flip_y, swap = _normalize(target)
    plan = PaddingPlan(a - g * t, b - g * t, (c + g) - 2 * g * t)
    return ReductionInstanceMap(
        source_family="UDISJ",
        source_params={"t": t, "wx": t, "wy": t, "labels": {0: 1, 1: 0}},
        source_length=3 * t,
        target=tuple(target), g=g, plan=plan,
        flip_x=flip_x, flip_y=flip_y, swap=swap,
        claimed_bound=t,
        label_distance={0: c - g, 1: c + g})


def reduce_from_setinc(target) -> ReductionInstanceMap:
    """Set-inclusion instances (weights t, t+w over 2t+w coords) onto a target."""
    _check_target(target)
    params = setinc_params(target)
    if params is None:
        raise ValueError(f"SetInc reduction infeasible for target {target}")
    t, w = params["t"], params["w"]
    (n, a, b, c, g), flip_x, flip_y, swap = _normalize(target)
    plan = PaddingPlan(a - g * t, b - g * (t + w), (c - g) - g * w)
    return ReductionInstanceMap(
        source_family="SetInc",
        source_params={"t": t, "w": w, "wx": t, "wy": t + w,
                       "labels": {0: t, 1: t - 1}},
        source_length=2 * t + w,
        target=tuple(target), g=g, plan=plan,
        flip_x=flip_x, flip_y=flip_y, swap=swap,
        claimed_bound=min(t, w),
        label_distance={0: c - g, 1: c + g})


def hadamard_encode(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(x, y) over k bits -> (codeword of x, indicator of y) over 2^k bits.

    The codeword lists the inner products <alpha, x> mod 2 over all alpha;
    it has weight exactly 2^(k-1) for x != 0, and its bit at address y is
    <x, y> mod 2.
    """
    k = len(x)
    alphas = np.arange(1 << k, dtype=np.int64)
    bits = (alphas[:, None] >> np.arange(k - 1, -1, -1)[None, :]) & 1
    X = (bits @ np.asarray(x, np.int64) % 2).astype(np.uint8)
    yv = int((np.asarray(y, np.int64) << np.arange(k - 1, -1, -1)).sum())
    Y = np.zeros(1 << k, np.uint8)
    Y[yv] = 1
    return X, Y


class HadamardMap(ReductionInstanceMap):
    """Sparse-indexing source realised as Hadamard codeword vs singleton."""

    def apply(self, x: np.ndarray, y: np.ndarray) -> InputPair:
        X, Y = hadamard_encode(x, y)
        # singleton on the small-weight (normalised Alice) side
        return super().apply(Y, X)

    def source_instances(self, limit: int = 20000, seed: int = 7):
        width = self.source_params["t"] + 1
        for xv in range(1, 1 << width):
            x = np.array([(xv >> i) & 1 for i in range(width)], np.uint8)
            for yv in range(1 << width):
                y = np.array([(yv >> i) & 1 for i in range(width)], np.uint8)
                parity = int(np.dot(x, y) % 2)
                yield x, y, 1 - parity  # inner product 1 = member = close

    def _counts(self) -> int:
        width = self.source_params["t"] + 1
        return ((1 << width) - 1) * (1 << width)


def reduce_from_sparse_indexing(target, mode: str = "ic") -> ReductionInstanceMap:
    """Sparse-indexing instances onto a target (see sparse_indexing_params)."""
    _check_target(target)
    params = sparse_indexing_params(target, mode)
    if params is None:
        raise ValueError(f"sparse-indexing reduction infeasible for {target} ({mode})")
    t = params["t"]
    (n, a, b, c, g), flip_x, flip_y, swap = _normalize(target)
    if mode == "one_way":
        plan = PaddingPlan(a - g * t, b - g, (c + g) - 2 * g * t)
        return ReductionInstanceMap(
            source_family="SI",
            source_params={"t": t, "mode": mode, "wx": t, "wy": 1,
                           "labels": {0: 1, 1: 0}},
            source_length=2 * t,
            target=tuple(target), g=g, plan=plan,
            flip_x=flip_x, flip_y=flip_y, swap=swap,
            claimed_bound=t,
            label_distance={0: c - g, 1: c + g})
    pw = 1 << t
    plan = PaddingPlan(a - g, b - g * pw, (c - g) - g * (pw - 1))
    return HadamardMap(
        source_family="SparseIndexing",
        source_params={"t": t, "mode": mode, "wx": 1, "wy": pw,
                       "labels": {0: 1, 1: 0}},
        source_length=1 << (t + 1),
        target=tuple(target), g=g, plan=plan,
        flip_x=flip_x, flip_y=flip_y, swap=swap,
        claimed_bound=t,
        label_distance={0: c - g, 1: c + g})
