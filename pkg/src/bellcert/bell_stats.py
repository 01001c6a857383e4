"""CHSH bookkeeping on trial records.

A round is *won* under the identity convention when ``a XOR b == x AND y``.
Each of the eight relabelling conventions is a choice of which setting pair
carries the minus sign in ``S = sum_xy s_xy E_xy`` together with a global
sign.  Every convention is realised as an involutive relabelling of the
record (flip settings, optionally flip Alice's outcome) followed by the
identity win test, so the estimators below only ever count wins.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, replace
from typing import Union

import numpy as np

from bellcert.exceptions import DomainError, EmptyDatasetError

__all__ = [
    "CONVENTIONS",
    "HERALD_STATES",
    "IDENTITY",
    "ConventionSpec",
    "CorrelatorTable",
    "RelabellingConvention",
    "TrialRecord",
    "chsh_from_correlators",
    "correlator_table",
    "effective_chsh",
    "mean_win_statistic",
    "resolve_convention",
    "win_count",
    "win_indicator",
]

HERALD_STATES = ("psi_plus", "psi_minus")


@dataclass(frozen=True, slots=True)
class TrialRecord:
    """One heralded round: settings ``x, y``, outcomes ``a, b``.

    ``herald_time`` is in nanoseconds; ``herald_state`` is one of
    :data:`HERALD_STATES` when known.
    """

    index: int
    x: int
    y: int
    a: int
    b: int
    herald_time: float | None = None
    herald_state: str | None = None

    def __post_init__(self):
        for name in ("x", "y", "a", "b"):
            value = getattr(self, name)
            if value not in (0, 1) or isinstance(value, float):
                raise DomainError(f"{name} must be 0 or 1, got {value!r}")
        if self.index < 0:
            raise DomainError(f"index must be non-negative, got {self.index!r}")
        if self.herald_time is not None and not self.herald_time >= 0:
            raise DomainError(f"herald_time must be a non-negative number, got {self.herald_time!r}")
        if self.herald_state is not None and self.herald_state not in HERALD_STATES:
            raise DomainError(
                f"herald_state must be one of {HERALD_STATES}, got {self.herald_state!r}")


# Setting pair that carries the minus sign, ordered so that id 0 is the
# textbook form E00 + E01 + E10 - E11.
_MINUS_PAIRS = ((1, 1), (1, 0), (0, 1), (0, 0))


@dataclass(frozen=True, slots=True)
class RelabellingConvention:
    """One of the eight equivalent sign conventions of the CHSH expression.

    ``id = 2 * k + g`` where ``k`` indexes the minus-sign position in
    ``(11, 10, 01, 00)`` and ``g = 1`` flips the global sign.
    """

    id: int

    def __post_init__(self):
        if not isinstance(self.id, (int, np.integer)) or isinstance(self.id, bool) \
                or self.id not in range(8):
            raise DomainError(f"convention id must be an integer in 0..7, got {self.id!r}")
        object.__setattr__(self, "id", int(self.id))

    @classmethod
    def from_signs(cls, sign_vector: Sequence[int], global_sign: int) -> "RelabellingConvention":
        """Build from ``(s00, s01, s10, s11)`` with exactly one ``-1``."""
        signs = tuple(int(s) for s in sign_vector)
        if len(signs) != 4 or sorted(signs) != [-1, 1, 1, 1]:
            raise DomainError(f"sign_vector needs exactly one -1 among four +-1 signs, got {signs}")
        if global_sign not in (1, -1):
            raise DomainError(f"global_sign must be +1 or -1, got {global_sign!r}")
        pos = signs.index(-1)
        pair = (pos >> 1, pos & 1)
        return cls(2 * _MINUS_PAIRS.index(pair) + (0 if global_sign == 1 else 1))

    @property
    def minus_pair(self) -> tuple[int, int]:
        return _MINUS_PAIRS[self.id >> 1]

    @property
    def global_sign(self) -> int:
        return -1 if self.id & 1 else 1

    @property
    def sign_vector(self) -> tuple[int, int, int, int]:
        x0, y0 = self.minus_pair
        return tuple(-1 if (x, y) == (x0, y0) else 1 for x in (0, 1) for y in (0, 1))

    def coefficient(self, x: int, y: int) -> int:
        """Signed weight of ``E_xy`` in this convention's CHSH expression."""
        return self.global_sign * self.sign_vector[2 * x + y]

    def apply(self, record: TrialRecord) -> TrialRecord:
        """Relabel a record so the identity win test realises this convention."""
        x0, y0 = self.minus_pair
        return replace(record, x=record.x ^ x0 ^ 1, y=record.y ^ y0 ^ 1,
                       a=record.a ^ (self.id & 1))

    def inverse(self) -> "RelabellingConvention":
        # The relabelling XORs constants, so it is its own inverse.
        return self

    def win_target(self) -> np.ndarray:
        """2x2 array giving the winning value of ``a XOR b`` for each ``(x, y)``."""
        target = np.zeros((2, 2), dtype=np.int8)
        for x in (0, 1):
            for y in (0, 1):
                target[x, y] = 0 if self.coefficient(x, y) == 1 else 1
        return target


CONVENTIONS = tuple(RelabellingConvention(i) for i in range(8))
IDENTITY = CONVENTIONS[0]

ConventionSpec = Union[RelabellingConvention, int, Mapping[str, Union[RelabellingConvention, int]]]


def _as_convention(value) -> RelabellingConvention:
    if isinstance(value, RelabellingConvention):
        return value
    return RelabellingConvention(value)


def resolve_convention(conv: ConventionSpec, record: TrialRecord) -> RelabellingConvention:
    """Pick the convention for ``record``.

    ``conv`` is either one convention for the whole dataset or a mapping from
    herald state to convention.
    """
    if isinstance(conv, Mapping):
        if record.herald_state is None:
            raise DomainError(
                f"record {record.index} has no herald_state but conventions are keyed by state")
        try:
            return _as_convention(conv[record.herald_state])
        except KeyError:
            raise DomainError(
                f"no convention configured for herald_state {record.herald_state!r}") from None
    return _as_convention(conv)


def win_indicator(record: TrialRecord, conv: ConventionSpec = IDENTITY) -> int:
    """1 if the round wins the CHSH game under ``conv``, else 0."""
    r = resolve_convention(conv, record).apply(record)
    return int((r.a ^ r.b) == (r.x & r.y))


def win_count(records: Iterable[TrialRecord], conv: ConventionSpec = IDENTITY) -> tuple[int, int]:
    """Return ``(wins, n)`` over ``records``."""
    if isinstance(conv, Mapping):
        wins = n = 0
        for record in records:
            wins += win_indicator(record, conv)
            n += 1
        return wins, n
    target = _as_convention(conv).win_target()
    wins = n = 0
    for r in records:
        wins += (r.a ^ r.b) == target[r.x, r.y]
        n += 1
    return int(wins), n


def mean_win_statistic(records: Iterable[TrialRecord],
                       conv: ConventionSpec = IDENTITY) -> tuple[float, int]:
    """Average win indicator and the integer win count.

    Raises
    ------
    EmptyDatasetError
        If ``records`` is empty.
    """
    wins, n = win_count(records, conv)
    if n == 0:
        raise EmptyDatasetError("cannot compute the win statistic of an empty dataset")
    return wins / n, wins


def effective_chsh(records: Iterable[TrialRecord], conv: ConventionSpec = IDENTITY) -> float:
    """CHSH value ``8 * T - 4`` evaluated as if settings were uniform."""
    t_bar, _ = mean_win_statistic(records, conv)
    return 8.0 * t_bar - 4.0


@dataclass(frozen=True)
class CorrelatorTable:
    """Empirical correlators ``E[x, y]`` and event counts per setting pair."""

    E: np.ndarray
    counts: np.ndarray

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    def as_dict(self) -> dict[str, float]:
        return {f"E{x}{y}": float(self.E[x, y]) for x in (0, 1) for y in (0, 1)}


def correlator_table(records: Iterable[TrialRecord]) -> CorrelatorTable:
    """Per-setting-pair mean of ``(-1)**(a+b)``; diagnostic only.

    Raises
    ------
    DomainError
        If some setting pair has no events; the message lists the missing pairs.
    """
    counts = np.zeros((2, 2), dtype=np.int64)
    same = np.zeros((2, 2), dtype=np.int64)
    for r in records:
        counts[r.x, r.y] += 1
        same[r.x, r.y] += r.a == r.b
    missing = [f"({x},{y})" for x in (0, 1) for y in (0, 1) if counts[x, y] == 0]
    if missing:
        raise DomainError(f"no events for setting pairs {', '.join(missing)}")
    E = (2 * same - counts) / counts
    return CorrelatorTable(E=E, counts=counts)


def chsh_from_correlators(table: CorrelatorTable, conv: RelabellingConvention | int = IDENTITY) -> float:
    conv = _as_convention(conv)
    return float(sum(conv.coefficient(x, y) * table.E[x, y] for x in (0, 1) for y in (0, 1)))
