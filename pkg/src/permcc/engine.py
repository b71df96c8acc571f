"""Two-party session execution with exact bit accounting.

A protocol side is a :class:`PartyProgram`: ``start`` builds per-session
state from the input and that party's randomness view, ``step`` consumes the
incoming message (None on the very first Alice turn) and returns the next
state plus either an outgoing message or a final output.  Messages are 0/1
uint8 arrays; the engine charges their exact lengths and nothing else --
self-delimiting framing is the protocol's job.

Turns strictly alternate starting with Alice.  An empty (or None) message
just passes the turn; two consecutive pass turns without an output is a
deadlock.  In one-way mode Bob may never send a nonempty message and must be
the party that outputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .funcspec import InputPair
from .randomness import RandomnessMode, PartyView, ALICE, BOB


class ProtocolError(RuntimeError):
    pass


class DeadlockError(ProtocolError):
    pass


class OneWayViolation(ProtocolError):
    pass


class PartyProgram:
    """One side of a protocol; subclasses implement start/step."""

    def start(self, bits: np.ndarray, view: PartyView):
        raise NotImplementedError

    def step(self, state, incoming):
        """Return (state, outgoing message or None, output or None)."""
        raise NotImplementedError


@dataclass
class ProtocolPair:
    """Both sides of a protocol plus its declared worst-case budget.

    Protocols whose round counts depend on the correlation parameter declare
    ``budget_bits = -1`` and provide ``budget_fn(mode)`` instead.
    """

    alice: PartyProgram
    bob: PartyProgram
    budget_bits: int
    one_way: bool = False
    meta: dict = field(default_factory=dict)
    budget_fn: object = None

    def budget(self, mode=None) -> int:
        if self.budget_bits >= 0:
            return self.budget_bits
        if self.budget_fn is None:
            raise ValueError("protocol declares no budget")
        return self.budget_fn(mode)


@dataclass
class SessionResult:
    output: int
    bits_a_to_b: int
    bits_b_to_a: int
    rounds: int
    transcript: list  # (sender, message bits) in order

    @property
    def total_bits(self) -> int:
        return self.bits_a_to_b + self.bits_b_to_a


def run_session(alice: PartyProgram, bob: PartyProgram, pair: InputPair,
                mode: RandomnessMode, one_way: bool = False,
                session: int | None = None,
                max_rounds: int = 10 ** 6) -> SessionResult:
    """Run one session to completion and account every transmitted bit."""
    key = mode.seed if session is None else session
    state_a = alice.start(pair.x, PartyView(mode, key, ALICE))
    state_b = bob.start(pair.y, PartyView(mode, key, BOB))
    bits = {ALICE: 0, BOB: 0}
    transcript = []
    incoming = None
    turn = ALICE
    idle = 0
    for round_no in range(max_rounds):
        if turn == ALICE:
            state_a, msg, out = alice.step(state_a, incoming)
        else:
            state_b, msg, out = bob.step(state_b, incoming)
        if out is not None:
            if one_way and turn != BOB:
                raise OneWayViolation("one-way sessions must end at Bob")
            return SessionResult(int(out), bits[ALICE], bits[BOB],
                                 round_no + 1, transcript)
        if msg is None:
            msg = np.zeros(0, dtype=np.uint8)
        msg = np.asarray(msg, dtype=np.uint8)
        if len(msg) and one_way and turn == BOB:
            raise OneWayViolation("Bob sent bits in a one-way session")
        bits[turn] += len(msg)
        transcript.append((turn, msg))
        idle = idle + 1 if len(msg) == 0 else 0
        if idle >= 2:
            raise DeadlockError("both parties passed without an output")
        incoming = msg
        turn = BOB if turn == ALICE else ALICE
    raise DeadlockError(f"no output within {max_rounds} rounds")


@dataclass
class InputStats:
    input_id: str
    a: int
    b: int
    d: int
    expected: int
    errors: int
    trials: int
    mean_bits: float
    max_bits: int
    max_bits_ab: int
    max_bits_ba: int
    rounds: int

    @property
    def error(self) -> float:
        return self.errors / self.trials

    @property
    def ci95(self) -> float:
        p = self.error
        return 1.96 * math.sqrt(p * (1 - p) / self.trials)


@dataclass
class TrialReport:
    trials: int
    per_input: list[InputStats]

    @property
    def max_error(self) -> float:
        return max((s.error for s in self.per_input), default=0.0)

    @property
    def max_bits(self) -> int:
        return max((s.max_bits for s in self.per_input), default=0)

    def to_rows(self) -> list[dict]:
        return [{"input_id": s.input_id, "a": s.a, "b": s.b, "d": s.d,
                 "expected": s.expected, "error": s.error, "ci95": s.ci95,
                 "bits_ab": s.max_bits_ab, "bits_ba": s.max_bits_ba,
                 "rounds": s.rounds} for s in self.per_input]


def estimate_error(pair_or_alice, bob=None, *, inputs, mode: RandomnessMode,
                   trials: int, seed: int | None = None,
                   one_way: bool = False) -> TrialReport:
    """Monte Carlo error estimate over labelled inputs.

    ``inputs`` is a list of (InputPair, expected) or (id, InputPair,
    expected).  Each (input, trial) runs under an independently derived
    session seed, so trial order is irrelevant to any single outcome.
    """
    if isinstance(pair_or_alice, ProtocolPair):
        alice, bob = pair_or_alice.alice, pair_or_alice.bob
        one_way = one_way or pair_or_alice.one_way
    else:
        alice = pair_or_alice
    base = mode.seed if seed is None else seed
    out = []
    for idx, item in enumerate(inputs):
        if len(item) == 3:
            input_id, pair, expected = item
        else:
            pair, expected = item
            input_id = str(idx)
        if expected is None:
            raise ValueError("expected values must be defined (not '?')")
        errors = 0
        total_bits = 0
        max_bits = max_ab = max_ba = rounds = 0
        for t in range(trials):
            session = rng.derive_key(base, idx, t)
            res = run_session(alice, bob, pair, mode, one_way=one_way,
                              session=session)
            errors += res.output != expected
            total_bits += res.total_bits
            if res.total_bits > max_bits:
                max_bits = res.total_bits
            max_ab = max(max_ab, res.bits_a_to_b)
            max_ba = max(max_ba, res.bits_b_to_a)
            rounds = max(rounds, res.rounds)
        out.append(InputStats(input_id, pair.weight_x, pair.weight_y,
                              pair.distance, expected, errors, trials,
                              total_bits / trials, max_bits, max_ab, max_ba,
                              rounds))
    return TrialReport(trials, out)
