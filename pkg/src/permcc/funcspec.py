"""Permutation-invariant functions as weight-slice tables.

A permutation-invariant partial function f: {0,1}^n x {0,1}^n -> {0,1,?} is
determined by the triple (|x|, |y|, Hamming distance), so it is stored as one
ternary table per weight pair (a, b), indexed by the achievable distances.
Values are 0, 1 or None (undefined, the "?" of a partial function).

Entries exist only for achievable distances: |a-b| <= d <= min(a+b, 2n-a-b)
with d = a+b (mod 2).  Tables are dense int8 arrays over that range
(rank (d - |a-b|) / 2), giving O(1) lookup at O(n^3) cells total; practical
cap n <= 4096.

Orientation convention for the partial set families (unique-disjointness,
sparse-indexing, set-inclusion): the *positive* branch -- intersecting /
member / included -- is the smaller distance, i.e. value 1 sits at d = c - g
of the equivalent exact-gap problem and value 0 at d = c + g.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import rng

Ternary = int | None  # 0, 1 or None ("?")

UNDEF = np.int8(-1)

FAMILIES = ("GHD", "eGHD", "UDISJ", "SetInc", "SI", "HD", "Equality")


def valid_distances(n: int, a: int, b: int) -> np.ndarray:
    """All achievable Hamming distances for |x| = a, |y| = b, ascending."""
    if not (0 <= a <= n and 0 <= b <= n):
        raise ValueError(f"weights out of range: n={n}, a={a}, b={b}")
    lo = abs(a - b)
    hi = min(a + b, 2 * n - a - b)
    return np.arange(lo, hi + 1, 2, dtype=np.int64)


def distance_rank(n: int, a: int, b: int, d: int) -> int:
    """Index of d within valid_distances(n, a, b); raises if not achievable."""
    lo = abs(a - b)
    hi = min(a + b, 2 * n - a - b)
    if d < lo or d > hi or (d - lo) % 2:
        raise ValueError(f"distance {d} not achievable for n={n}, a={a}, b={b}")
    return (d - lo) // 2


@dataclass
class InputPair:
    """A concrete input pair; x and y are 0/1 arrays of equal length."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.uint8)
        self.y = np.asarray(self.y, dtype=np.uint8)
        if self.x.shape != self.y.shape or self.x.ndim != 1:
            raise ValueError("x and y must be equal-length bit vectors")

    @property
    def n(self) -> int:
        return len(self.x)

    @property
    def weight_x(self) -> int:
        return int(self.x.sum())

    @property
    def weight_y(self) -> int:
        return int(self.y.sum())

    @property
    def distance(self) -> int:
        return int((self.x ^ self.y).sum())

    def permuted(self, perm: np.ndarray) -> "InputPair":
        return InputPair(self.x[perm], self.y[perm])


@dataclass(frozen=True)
class StronglyPIDescriptor:
    """A binary gate applied coordinatewise, then a symmetric vote.

    ``gate`` maps each (x_i, y_i) in {0,1}^2 to a bit; ``sigma`` maps the
    count of gate-1 coordinates (0..n) to the output bit.
    """

    gate: tuple[int, int, int, int]  # value at (u,v) = gate[2*u + v]
    sigma: tuple[int, ...]

    def __post_init__(self):
        if len(self.gate) != 4 or any(v not in (0, 1) for v in self.gate):
            raise ValueError("gate must be 4 bits")
        if any(v not in (0, 1) for v in self.sigma):
            raise ValueError("sigma must be bits")

    def gate_value(self, u: int, v: int) -> int:
        return self.gate[2 * u + v]


class FunctionSpec:
    """Slice-table representation of a permutation-invariant function."""

    def __init__(self, n: int, slices: dict[tuple[int, int], np.ndarray],
                 origin: dict | None = None):
        self.n = n
        self.slices = slices
        self.origin = origin or {"family": "explicit"}
        for (a, b), table in slices.items():
            if len(table) != len(valid_distances(n, a, b)):
                raise ValueError(f"slice ({a},{b}) has wrong length")

    # -- lookups -------------------------------------------------------------

    def value(self, a: int, b: int, d: int) -> Ternary:
        """h(a, b, d); None when undefined."""
        table = self.slices.get((a, b))
        if table is None:
            return None
        v = table[distance_rank(self.n, a, b, d)]
        return None if v == UNDEF else int(v)

    def slice_table(self, a: int, b: int) -> dict[int, Ternary]:
        """The (a, b) slice as {distance: value}, over achievable distances."""
        ds = valid_distances(self.n, a, b)
        table = self.slices.get((a, b))
        if table is None:
            return {int(d): None for d in ds}
        return {int(d): (None if v == UNDEF else int(v))
                for d, v in zip(ds, table)}

    def eval(self, pair: InputPair) -> Ternary:
        if pair.n != self.n:
            raise ValueError(f"input length {pair.n} != spec length {self.n}")
        return self.value(pair.weight_x, pair.weight_y, pair.distance)

    def value_flipped(self, a: int, b: int, d: int,
                      flip_x: bool = False, flip_y: bool = False) -> Ternary:
        """Value of the function with either input complemented.

        Complementing x maps (a, b, d) -> (n - a, b, n - d); complementing y
        maps (a, b, d) -> (a, n - b, n - d); both leave d unchanged.
        """
        if flip_x:
            a, d = self.n - a, self.n - d
        if flip_y:
            b, d = self.n - b, self.n - d
        return self.value(a, b, d)

    @property
    def is_total(self) -> bool:
        for (a, b), table in self.slices.items():
            if (table == UNDEF).any():
                return False
        return len(self.slices) == (self.n + 1) ** 2

    def tables_equal(self, other: "FunctionSpec") -> bool:
        if self.n != other.n:
            return False
        for a in range(self.n + 1):
            for b in range(self.n + 1):
                ta = self.slices.get((a, b))
                tb = other.slices.get((a, b))
                if ta is None and tb is None:
                    continue
                ds = len(valid_distances(self.n, a, b))
                ta = ta if ta is not None else np.full(ds, UNDEF)
                tb = tb if tb is not None else np.full(ds, UNDEF)
                if not np.array_equal(ta, tb):
                    return False
        return True

    # -- serialisation -------------------------------------------------------

    def to_json(self) -> str:
        dense = []
        for a in range(self.n + 1):
            row = []
            for b in range(self.n + 1):
                table = self.slices.get((a, b))
                nd = len(valid_distances(self.n, a, b))
                if table is None:
                    row.append([None] * nd)
                else:
                    row.append([None if v == UNDEF else int(v) for v in table])
            dense.append(row)
        payload = {"n": self.n,
                   "family": self.origin.get("family", "explicit"),
                   "params": {k: v for k, v in self.origin.items() if k != "family"},
                   "slices": dense}
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "FunctionSpec":
        payload = json.loads(text)
        n = payload["n"]
        family = payload.get("family", "explicit")
        params = payload.get("params", {})
        if payload.get("slices") is not None:
            slices = {}
            for a in range(n + 1):
                for b in range(n + 1):
                    cells = payload["slices"][a][b]
                    slices[(a, b)] = np.array(
                        [UNDEF if v is None else v for v in cells], dtype=np.int8)
            origin = dict(params)
            origin["family"] = family
            return cls(n, slices, origin)
        if family == "explicit":
            raise ValueError("explicit spec file without slice tables")
        return build_named(family, n=n, **params)

    def save(self, path: str) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path: str) -> "FunctionSpec":
        with open(path) as fh:
            return cls.from_json(fh.read())


def _empty_slices(n: int) -> dict[tuple[int, int], np.ndarray]:
    return {(a, b): np.full(len(valid_distances(n, a, b)), UNDEF, dtype=np.int8)
            for a in range(n + 1) for b in range(n + 1)}


def _set(slices, n, a, b, d, value):
    slices[(a, b)][distance_rank(n, a, b, d)] = np.int8(value)


# -- named families ----------------------------------------------------------

def build_named(family: str, n: int, **params) -> FunctionSpec:
    """Construct a named problem family as a FunctionSpec.

    GHD(n, a, b, c, g): 1 when the distance is >= c+g, 0 when <= c-g,
    undefined otherwise (including every other weight pair).
    eGHD: same but only the two distances c-g, c+g are defined.
    UDISJ(n, t): weight-t sets; 1 iff the intersection is a single element
    (distance 2t-2), 0 iff disjoint (distance 2t).
    SI(n, t): |x| = t, |y| = 1; 1 iff Bob's element is in Alice's set.
    SetInc(n, p, q): |x| = p, |y| = q; 1 iff x is contained in y.
    HD(n, k): total; 1 iff the distance is <= k.
    Equality(n): total; 1 iff x = y.
    """
    if family == "GHD" or family == "eGHD":
        a, b, c, g = params["a"], params["b"], params["c"], params["g"]
        if g < 1:
            raise ValueError("gap g must be >= 1")
        ds = valid_distances(n, a, b)
        if (c + g) not in ds or (c - g) not in ds:
            raise ValueError(
                f"distances c-g={c - g}, c+g={c + g} not achievable for "
                f"n={n}, a={a}, b={b}")
        slices = _empty_slices(n)
        if family == "GHD":
            for d in ds:
                if d >= c + g:
                    _set(slices, n, a, b, d, 1)
                elif d <= c - g:
                    _set(slices, n, a, b, d, 0)
        else:
            _set(slices, n, a, b, c + g, 1)
            _set(slices, n, a, b, c - g, 0)
        return FunctionSpec(n, slices, {"family": family, "a": a, "b": b,
                                        "c": c, "g": g})

    if family == "UDISJ":
        t = params["t"]
        f = build_named("eGHD", n, a=t, b=t, c=2 * t - 1, g=1)
        # positive (intersecting) branch is the smaller distance
        table = f.slices[(t, t)]
        table[:] = np.where(table == 1, np.int8(2), table)
        table[:] = np.where(table == 0, np.int8(1), table)
        table[:] = np.where(table == 2, np.int8(0), table)
        f.origin = {"family": "UDISJ", "t": t}
        return f

    if family == "SI":
        t = params["t"]
        f = build_named("eGHD", n, a=t, b=1, c=t, g=1)
        table = f.slices[(t, 1)]
        table[:] = np.where(table == 1, np.int8(2), table)
        table[:] = np.where(table == 0, np.int8(1), table)
        table[:] = np.where(table == 2, np.int8(0), table)
        f.origin = {"family": "SI", "t": t}
        return f

    if family == "SetInc":
        p, q = params["p"], params["q"]
        if not p <= q:
            raise ValueError("SetInc requires p <= q")
        f = build_named("eGHD", n, a=p, b=q, c=q - p + 1, g=1)
        table = f.slices[(p, q)]
        table[:] = np.where(table == 1, np.int8(2), table)
        table[:] = np.where(table == 0, np.int8(1), table)
        table[:] = np.where(table == 2, np.int8(0), table)
        f.origin = {"family": "SetInc", "p": p, "q": q}
        return f

    if family == "HD":
        k = params["k"]
        slices = {}
        for a in range(n + 1):
            for b in range(n + 1):
                ds = valid_distances(n, a, b)
                slices[(a, b)] = (ds <= k).astype(np.int8)
        return FunctionSpec(n, slices, {"family": "HD", "k": k})

    if family == "Equality":
        slices = {}
        for a in range(n + 1):
            for b in range(n + 1):
                ds = valid_distances(n, a, b)
                slices[(a, b)] = ((ds == 0) & (a == b)).astype(np.int8)
        return FunctionSpec(n, slices, {"family": "Equality"})

    raise ValueError(f"unknown family {family!r}; known: {FAMILIES}")


def build_strongly_pi(n: int, desc: StronglyPIDescriptor) -> FunctionSpec:
    """Expand a strongly permutation-invariant descriptor into slice tables."""
    if len(desc.sigma) != n + 1:
        raise ValueError("sigma must have n + 1 entries")
    g00, g01, g10, g11 = desc.gate
    slices = {}
    for a in range(n + 1):
        for b in range(n + 1):
            ds = valid_distances(n, a, b)
            i11 = (a + b - ds) // 2
            i10 = a - i11
            i01 = b - i11
            i00 = n - a - b + i11
            count = g11 * i11 + g10 * i10 + g01 * i01 + g00 * i00
            sigma = np.asarray(desc.sigma, dtype=np.int8)
            slices[(a, b)] = sigma[count]
    return FunctionSpec(n, slices, {"family": "strongly_pi",
                                    "gate": list(desc.gate),
                                    "sigma": list(desc.sigma)})


def canonical_pair(n: int, a: int, b: int, d: int) -> InputPair:
    """Fixed representative input with |x| = a, |y| = b, distance d.

    x is a ones then zeros; y packs (a+b-d)/2 ones at the left of supp(x)
    and the rest immediately after position a.
    """
    ds = valid_distances(n, a, b)
    if d not in ds:
        raise ValueError(f"distance {d} not achievable for n={n}, a={a}, b={b}")
    i11 = (a + b - d) // 2
    x = np.zeros(n, dtype=np.uint8)
    x[:a] = 1
    y = np.zeros(n, dtype=np.uint8)
    y[:i11] = 1
    y[a:a + (b - i11)] = 1
    return InputPair(x, y)


def random_total_pi(n: int, seed: int, plateau_bias: float = 0.25) -> FunctionSpec:
    """Seeded random total permutation-invariant function.

    Each slice is a walk over its achievable distances: the first value is a
    fair coin and each subsequent value flips with probability
    ``plateau_bias`` (0 = all slices constant, 1 = alternating).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 <= plateau_bias <= 1.0:
        raise ValueError("plateau_bias must lie in [0, 1]")
    init_stream = rng.stream_key("rtpi.init")
    step_stream = rng.stream_key("rtpi.step")
    threshold = int(round(plateau_bias * 2.0 ** 64))
    slices = {}
    for a in range(n + 1):
        for b in range(n + 1):
            ds = valid_distances(n, a, b)
            m = len(ds)
            cell = (a * (n + 2) + b) * (n + 2)
            first = rng.keyed_word(seed, init_stream, cell) & 1
            if m == 1:
                slices[(a, b)] = np.array([first], dtype=np.int8)
                continue
            steps = rng.keyed_words(seed, step_stream,
                                    np.arange(cell + 1, cell + m, dtype=np.uint64))
            flips = (steps < np.uint64(min(threshold, 2 ** 64 - 1))).astype(np.int8) \
                if threshold < 2 ** 64 else np.ones(m - 1, dtype=np.int8)
            vals = np.empty(m, dtype=np.int8)
            vals[0] = first
            vals[1:] = (first + np.cumsum(flips)) % 2
            slices[(a, b)] = vals
    return FunctionSpec(n, slices, {"family": "random_total_pi", "seed": seed,
                                    "plateau_bias": plateau_bias})
