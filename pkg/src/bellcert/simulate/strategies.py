"""Adversarial (non-IID) source strategies for the simulator.

A strategy maps ``(round index, state, herald time)`` to a conditional
behaviour ``P(a, b | x, y)`` stored as a 4x4 table: row ``2*x + y``, column
``2*a + b``.  ``state`` is a small integer summarising whatever the strategy
remembers of the past; it is advanced after every round from the realised
record.

The catalogue below is our own construction for stress-testing the
confidence bound.  None of these behaviours is meant to model a particular
experiment.
"""

from __future__ import annotations

import json
import math
from abc import ABC, abstractmethod
from collections.abc import Callable, Mapping, Sequence
from pathlib import Path

import numpy as np

from bellcert.bell_stats import TrialRecord
from bellcert.exceptions import DomainError, ParseError

__all__ = [
    "BUILTIN_STRATEGIES",
    "WIN_MASK",
    "ConstantStrategy",
    "FiniteStateStrategy",
    "HeraldTwoRegimeStrategy",
    "ScheduledDriftStrategy",
    "Strategy",
    "deterministic_table",
    "make_strategy",
    "noisy_pr_table",
    "singlet_table",
    "validate_table",
    "win_probability",
]

# WIN_MASK[2x+y, 2a+b] = 1 when a XOR b == x AND y.
WIN_MASK = np.array([[1.0 if (a ^ b) == (x & y) else 0.0 for a in (0, 1) for b in (0, 1)]
                     for x in (0, 1) for y in (0, 1)])


def validate_table(table, atol: float = 1e-9) -> np.ndarray:
    """Check a 4x4 conditional table and return it as a float array."""
    t = np.asarray(table, dtype=float)
    if t.shape == (16,):
        t = t.reshape(4, 4)
    if t.shape != (4, 4):
        raise DomainError(f"conditional table must have shape (4, 4), got {t.shape}")
    if not np.all(np.isfinite(t)) or np.any(t < -atol):
        raise DomainError("conditional table entries must be finite and non-negative")
    sums = t.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > atol):
        raise DomainError(f"each setting row must sum to 1, got row sums {sums.tolist()}")
    t = np.clip(t, 0.0, None)
    return t / t.sum(axis=1, keepdims=True)


def win_probability(table: np.ndarray) -> float:
    """CHSH winning probability of a behaviour with uniformly weighted settings."""
    return float((np.asarray(table) * WIN_MASK).sum() / 4.0)


def singlet_table(visibility: float = 1.0) -> np.ndarray:
    """Optimal CHSH measurements on a Werner state of the given visibility.

    ``E_xy = v / sqrt 2`` except ``E_11 = -v / sqrt 2``; the winning
    probability is ``(4 + 2 sqrt 2 v) / 8``.
    """
    if not 0.0 <= visibility <= 1.0:
        raise DomainError(f"visibility must lie in [0, 1], got {visibility!r}")
    t = np.empty((4, 4))
    for x in (0, 1):
        for y in (0, 1):
            e = visibility / math.sqrt(2.0) * (-1.0 if x & y else 1.0)
            for a in (0, 1):
                for b in (0, 1):
                    t[2 * x + y, 2 * a + b] = (1.0 + (-1) ** (a + b) * e) / 4.0
    return t


def noisy_pr_table(q: float) -> np.ndarray:
    """Behaviour that wins with probability ``q`` for every setting pair."""
    if not 0.0 <= q <= 1.0:
        raise DomainError(f"winning probability must lie in [0, 1], got {q!r}")
    return WIN_MASK * (q / 2.0) + (1.0 - WIN_MASK) * ((1.0 - q) / 2.0)


def deterministic_table(a: int = 0, b: int = 0) -> np.ndarray:
    """Local deterministic behaviour: outputs ``a`` and ``b`` regardless of settings."""
    t = np.zeros((4, 4))
    t[:, 2 * a + b] = 1.0
    return t


class Strategy(ABC):
    """Base class for simulated sources.

    Subclasses implement :meth:`table`; history-dependent ones also override
    :meth:`next_state`.  The ``batch_*`` hooks evaluate many independent runs
    at once and default to looping over the scalar methods.
    """

    name: str = "strategy"
    needs_herald_time: bool = False

    def initial_state(self) -> int:
        return 0

    @abstractmethod
    def table(self, index: int, state: int, herald_time: float | None = None) -> np.ndarray:
        ...

    def next_state(self, state: int, record: TrialRecord) -> int:
        return state

    def batch_tables(self, index: int, states: np.ndarray,
                     herald_times: np.ndarray | None = None) -> np.ndarray:
        ht = [None] * len(states) if herald_times is None else herald_times.tolist()
        return np.stack([self.table(index, int(s), t) for s, t in zip(states, ht)])

    def batch_next_state(self, states: np.ndarray, index: int, x, y, a, b) -> np.ndarray:
        out = np.empty_like(states)
        for j, s in enumerate(states):
            rec = TrialRecord(index, int(x[j]), int(y[j]), int(a[j]), int(b[j]))
            out[j] = self.next_state(int(s), rec)
        return out

    def describe(self) -> dict:
        return {"name": self.name}


class ConstantStrategy(Strategy):
    """The same behaviour in every round (the IID case)."""

    def __init__(self, table, name: str = "iid"):
        self._table = validate_table(table)
        self.name = name

    @classmethod
    def noisy_pr_box(cls, q: float) -> "ConstantStrategy":
        return cls(noisy_pr_table(q), name="iid")

    @classmethod
    def singlet(cls, visibility: float = 1.0) -> "ConstantStrategy":
        return cls(singlet_table(visibility), name="singlet")

    @classmethod
    def deterministic_local(cls, a: int = 0, b: int = 0) -> "ConstantStrategy":
        return cls(deterministic_table(a, b), name="deterministic_local")

    def table(self, index, state, herald_time=None):
        return self._table

    def batch_tables(self, index, states, herald_times=None):
        return self._table

    def batch_next_state(self, states, index, x, y, a, b):
        return states

    def describe(self):
        return {"name": self.name, "win_probability": win_probability(self._table)}


class ScheduledDriftStrategy(Strategy):
    """Mixes two behaviours with a weight that oscillates with the round index.

    The weight on ``end`` is ``(1 - cos(2 pi i / period)) / 2``, so the
    source drifts from ``start`` to ``end`` and back every ``period`` rounds.
    """

    name = "drift"

    def __init__(self, start, end, period: int = 200):
        if period < 1:
            raise DomainError(f"period must be positive, got {period!r}")
        self.start = validate_table(start)
        self.end = validate_table(end)
        self.period = int(period)

    def weight(self, index: int) -> float:
        return 0.5 * (1.0 - math.cos(2.0 * math.pi * index / self.period))

    def table(self, index, state, herald_time=None):
        w = self.weight(index)
        return (1.0 - w) * self.start + w * self.end

    def batch_tables(self, index, states, herald_times=None):
        return self.table(index, 0)

    def batch_next_state(self, states, index, x, y, a, b):
        return states

    def describe(self):
        return {"name": self.name, "period": self.period,
                "win_probability_range": sorted([win_probability(self.start),
                                                 win_probability(self.end)])}


class FiniteStateStrategy(Strategy):
    """Finite automaton whose state moves on each round's win or loss.

    ``tables[s]`` is the behaviour used in state ``s``; after a won round the
    state becomes ``on_win[s]``, after a lost one ``on_loss[s]``.  Wins are
    judged with the identity CHSH convention.
    """

    def __init__(self, tables: Sequence, on_win: Sequence[int], on_loss: Sequence[int],
                 initial: int = 0, name: str = "finite_state", state_names: Sequence[str] = ()):
        self.tables = np.stack([validate_table(t) for t in tables])
        k = len(self.tables)
        self.on_win = np.asarray(on_win, dtype=np.int64)
        self.on_loss = np.asarray(on_loss, dtype=np.int64)
        if self.on_win.shape != (k,) or self.on_loss.shape != (k,):
            raise DomainError("on_win and on_loss need one entry per state")
        for arr in (self.on_win, self.on_loss):
            if np.any(arr < 0) or np.any(arr >= k):
                raise DomainError("state transitions must point at existing states")
        if not 0 <= initial < k:
            raise DomainError(f"initial state {initial} out of range")
        self.initial = int(initial)
        self.name = name
        self.state_names = tuple(state_names) or tuple(f"s{i}" for i in range(k))

    @classmethod
    def drop_after_loss(cls, good_visibility: float = 1.0) -> "FiniteStateStrategy":
        """Singlet source that falls back to a local deterministic box after each loss."""
        return cls([singlet_table(good_visibility), deterministic_table()],
                   on_win=[0, 0], on_loss=[1, 1], name="drop_after_loss",
                   state_names=("good", "bad"))

    @classmethod
    def from_file(cls, path: str | Path) -> "FiniteStateStrategy":
        """Load a strategy from a JSON document.

        Expected layout::

            {"name": "...", "initial": "good",
             "states": {"good": [16 probabilities], "bad": [...]},
             "transitions": {"good": {"win": "good", "loss": "bad"}, ...}}

        The 16 probabilities run over ``(x, y)`` rows then ``(a, b)`` columns,
        both in binary order.  Missing transitions keep the state unchanged.
        """
        path = Path(path)
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ParseError(f"cannot read strategy file: {exc}", path=str(path)) from None
        return cls.from_dict(doc, source=str(path))

    @classmethod
    def from_dict(cls, doc: Mapping, source: str | None = None) -> "FiniteStateStrategy":
        if not isinstance(doc, Mapping):
            raise ParseError("strategy document must be a JSON object", path=source)
        unknown = set(doc) - {"name", "initial", "states", "transitions"}
        if unknown:
            raise ParseError(f"unknown strategy keys {sorted(unknown)}", path=source)
        states = doc.get("states")
        if not isinstance(states, Mapping) or not states:
            raise ParseError("'states' must map state names to 16 probabilities", path=source)
        names = list(states)
        tables = []
        for nm in names:
            probs = states[nm]
            if not isinstance(probs, Sequence) or len(probs) != 16:
                raise ParseError(f"state {nm!r} needs exactly 16 probabilities", path=source)
            try:
                tables.append(validate_table(np.asarray(probs, dtype=float).reshape(4, 4)))
            except (DomainError, ValueError, TypeError) as exc:
                raise ParseError(f"state {nm!r}: {exc}", path=source) from None
        transitions = doc.get("transitions", {})
        on_win, on_loss = [], []
        for i, nm in enumerate(names):
            tr = transitions.get(nm, {})
            try:
                on_win.append(names.index(tr.get("win", nm)))
                on_loss.append(names.index(tr.get("loss", nm)))
            except ValueError:
                raise ParseError(f"transition from {nm!r} names an unknown state",
                                 path=source) from None
        initial = doc.get("initial", names[0])
        if initial not in names:
            raise ParseError(f"initial state {initial!r} is not defined", path=source)
        return cls(tables, on_win, on_loss, initial=names.index(initial),
                   name=str(doc.get("name", "file")), state_names=names)

    def initial_state(self):
        return self.initial

    def table(self, index, state, herald_time=None):
        return self.tables[state]

    def next_state(self, state, record):
        won = (record.a ^ record.b) == (record.x & record.y)
        return int(self.on_win[state] if won else self.on_loss[state])

    def batch_tables(self, index, states, herald_times=None):
        return self.tables[states]

    def batch_next_state(self, states, index, x, y, a, b):
        won = (a ^ b) == (x & y)
        return np.where(won, self.on_win[states], self.on_loss[states])

    def describe(self):
        return {"name": self.name, "states": list(self.state_names),
                "win_probabilities": [win_probability(t) for t in self.tables]}


class HeraldTwoRegimeStrategy(Strategy):
    """Behaviour ``early`` for herald times below ``cutoff`` ns and ``late`` otherwise."""

    name = "herald_two_regime"
    needs_herald_time = True

    def __init__(self, early, late, cutoff: float):
        self.early = validate_table(early)
        self.late = validate_table(late)
        self.cutoff = float(cutoff)

    def table(self, index, state, herald_time=None):
        if herald_time is None:
            raise DomainError("herald_two_regime needs herald times; configure a herald range")
        return self.late if herald_time >= self.cutoff else self.early

    def batch_tables(self, index, states, herald_times=None):
        if herald_times is None:
            raise DomainError("herald_two_regime needs herald times; configure a herald range")
        return np.where((herald_times >= self.cutoff)[:, None, None], self.late, self.early)

    def batch_next_state(self, states, index, x, y, a, b):
        return states

    def describe(self):
        return {"name": self.name, "cutoff": self.cutoff,
                "win_probability_early": win_probability(self.early),
                "win_probability_late": win_probability(self.late)}


BUILTIN_STRATEGIES: dict[str, Callable[..., Strategy]] = {
    "iid": lambda q=0.75: ConstantStrategy.noisy_pr_box(q),
    "singlet": lambda visibility=1.0: ConstantStrategy.singlet(visibility),
    "deterministic_local": lambda a=0, b=0: ConstantStrategy.deterministic_local(a, b),
    "drift": lambda v_start=0.5, v_end=1.0, period=200: ScheduledDriftStrategy(
        singlet_table(v_start), singlet_table(v_end), period),
    "drop_after_loss": lambda good_visibility=1.0: FiniteStateStrategy.drop_after_loss(
        good_visibility),
    "herald_two_regime": lambda early_visibility=0.5, late_visibility=0.95, cutoff=750.0:
        HeraldTwoRegimeStrategy(singlet_table(early_visibility), singlet_table(late_visibility),
                                cutoff),
}


def make_strategy(name: str, **params) -> Strategy:
    """Instantiate a catalogue strategy by name, or load one from ``file=PATH``."""
    if name == "file":
        if set(params) != {"path"}:
            raise DomainError("file strategies take exactly one parameter: path")
        return FiniteStateStrategy.from_file(params["path"])
    try:
        factory = BUILTIN_STRATEGIES[name]
    except KeyError:
        raise DomainError(
            f"unknown strategy {name!r}; choose from {sorted(BUILTIN_STRATEGIES)} or 'file'"
        ) from None
    try:
        return factory(**params)
    except TypeError as exc:
        raise DomainError(f"bad parameters for strategy {name!r}: {exc}") from None
