"""Combinatorial complexity measures over slice tables.

A *jump* of a slice table is a pair (c, g) with the values at distances
c - g and c + g defined and different, and every distance strictly between
undefined.  Jumps are the atomic hard sub-problems a protocol must resolve;
the measures below score the hardest jump of the function.

For a jump (c, g) of slice (a, b):

* two-way linear term:  min(a, b, c, n-a, n-b, n-c) / g
* one-way linear term:  min(a, c, n-a, n-c) / g
* log term:             log2(min(c, n-c) / g)

The reported value is the maximum over all slices and jumps of the larger
term, with no constant divided out (consumers divide by their own C).
Linear terms are exact rationals; the log term is a float.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction

from .funcspec import FunctionSpec, Ternary, valid_distances
from . import reductions

TWO_WAY = "two_way"
ONE_WAY = "one_way"


@dataclass(frozen=True)
class Jump:
    c: int
    g: int


@dataclass
class MeasureReport:
    mode: str
    raw_value: float
    argmax: dict | None  # {a, b, c, g, kind}; None when there are no jumps
    per_slice_jumps: dict[tuple[int, int], list[Jump]]
    raw_exact: Fraction | None  # exact value when the argmax term is linear

    def to_json(self) -> str:
        payload = {
            "mode": self.mode,
            "raw_value": self.raw_value,
            "argmax": self.argmax,
            "jumps": {f"{a},{b}": [[j.c, j.g] for j in js]
                      for (a, b), js in sorted(self.per_slice_jumps.items()) if js},
        }
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))


@dataclass(frozen=True)
class ReductionCertificate:
    """Parameters of the best feasible source-problem embedding for a jump."""

    family: str  # "UDISJ" | "SetInc" | "SparseIndexing"
    params: dict
    target: tuple[int, int, int, int, int]  # (n, a, b, c, g)
    claimed_bound: int


def jumps(table: dict[int, Ternary]) -> list[Jump]:
    """All jumps of one slice, given as {distance: 0/1/None}, c ascending."""
    defined = [(d, v) for d, v in sorted(table.items()) if v is not None]
    out = []
    for (d1, v1), (d2, v2) in zip(defined, defined[1:]):
        if v1 != v2:
            out.append(Jump((d1 + d2) // 2, (d2 - d1) // 2))
    return out


def _linear_min(n: int, a: int, b: int, c: int, mode: str) -> int:
    if mode == TWO_WAY:
        return min(a, b, c, n - a, n - b, n - c)
    return min(a, c, n - a, n - c)


def measure(f: FunctionSpec, mode: str = TWO_WAY) -> MeasureReport:
    """Scan every slice, score every jump, return the maximising one.

    Ties broken toward the lexicographically smallest (a, b, c, g); between
    equal linear and log terms the linear term is reported.
    """
    if mode not in (TWO_WAY, ONE_WAY):
        raise ValueError(f"mode must be {TWO_WAY!r} or {ONE_WAY!r}")
    n = f.n
    best_val = 0.0
    best_exact: Fraction | None = None
    argmax = None
    per_slice: dict[tuple[int, int], list[Jump]] = {}
    for a in range(n + 1):
        for b in range(n + 1):
            js = jumps(f.slice_table(a, b))
            per_slice[(a, b)] = js
            for j in js:
                lin = Fraction(_linear_min(n, a, b, j.c, mode), j.g)
                log = math.log2(min(j.c, n - j.c) / j.g)
                if lin >= log:
                    val, kind, exact = float(lin), "linear", lin
                else:
                    val, kind, exact = log, "log", None
                if val > best_val and not math.isclose(val, best_val, rel_tol=0, abs_tol=1e-12):
                    best_val = val
                    best_exact = exact
                    argmax = {"a": a, "b": b, "c": j.c, "g": j.g, "kind": kind}
    return MeasureReport(mode, best_val, argmax, per_slice, best_exact)


def certificate(f: FunctionSpec, report: MeasureReport) -> ReductionCertificate:
    """Best feasible source-problem embedding for the report's argmax jump.

    The target is weight-normalised (complement either input so a, b <= n/2,
    swap roles so a <= b) before the per-family parameter formulas apply;
    UDISJ, SetInc and SparseIndexing candidates are compared by claimed
    bound, SetInc preferred on ties, then UDISJ.
    """
    if report.raw_value <= 0 or report.argmax is None:
        raise ValueError("certificate requires a positive measure")
    n = f.n
    am = report.argmax
    target = (n, am["a"], am["b"], am["c"], am["g"])
    candidates = []
    udisj = reductions.udisj_params(target)
    if udisj is not None:
        candidates.append(("UDISJ", udisj, udisj["t"]))
    setinc = reductions.setinc_params(target)
    if setinc is not None:
        candidates.append(("SetInc", setinc, min(setinc["t"], setinc["w"])))
    si = reductions.sparse_indexing_params(
        target, mode="one_way" if report.mode == ONE_WAY else "ic")
    if si is not None:
        candidates.append(("SparseIndexing", si, si["t"]))
    if not candidates:
        raise ValueError(f"no feasible reduction family for target {target}")
    priority = {"SetInc": 0, "UDISJ": 1, "SparseIndexing": 2}
    family, params, bound = max(
        candidates, key=lambda c: (c[2], -priority[c[0]]))
    return ReductionCertificate(family, params, target, bound)
