"""Exact oracles behind the confidence bound: Poisson-binomial law,
Hoeffding's interval inequality, and the settings-bias gap."""

from __future__ import annotations

import itertools
import math
from collections.abc import Sequence
from typing import NamedTuple

import numpy as np

from bellcert.exceptions import DomainError
from bellcert.specfun import binomial_interval

__all__ = [
    "HoeffdingResult",
    "bias_gap_oracle",
    "bias_gap_value",
    "exact_poisson_binomial",
    "hoeffding_check",
]

ORACLE_MAX_N = 1000


def exact_poisson_binomial(q_vec: Sequence[float]) -> np.ndarray:
    """Probability mass of the number of successes among independent Bernoulli(q_i).

    Computed by convolving one trial at a time; entry ``k`` is ``P(K = k)``.
    """
    q = np.asarray(q_vec, dtype=float)
    if q.ndim != 1 or len(q) == 0:
        raise DomainError("q_vec must be a non-empty one-dimensional sequence")
    if len(q) > ORACLE_MAX_N:
        raise DomainError(f"exact convolution is limited to n <= {ORACLE_MAX_N}, got {len(q)}")
    if np.any(~np.isfinite(q)) or np.any(q < 0) or np.any(q > 1):
        raise DomainError("every q_i must lie in [0, 1]")
    pmf = np.array([1.0])
    for p in q:
        nxt = np.zeros(len(pmf) + 1)
        nxt[:-1] = pmf * (1.0 - p)
        nxt[1:] += pmf * p
        pmf = nxt
    return pmf


class HoeffdingResult(NamedTuple):
    lhs: float
    rhs: float
    ok: bool


def hoeffding_check(q_vec: Sequence[float], c: int, d: int, slack: float = 1e-12) -> HoeffdingResult:
    """Compare ``P(c <= K <= d)`` with the binomial probability at the mean ``q``.

    Requires ``0 <= c <= n * mean(q) <= d <= n``; the inequality
    ``lhs >= rhs`` then holds for every choice of the ``q_i``.
    """
    pmf = exact_poisson_binomial(q_vec)
    n = len(pmf) - 1
    total = math.fsum(float(v) for v in q_vec)
    if not (isinstance(c, (int, np.integer)) and isinstance(d, (int, np.integer))):
        raise DomainError("c and d must be integers")
    if not (0 <= c <= total + 1e-12 and total - 1e-12 <= d <= n):
        raise DomainError(
            f"need 0 <= c <= n*mean(q) <= d <= n, got c={c}, n*mean(q)={total}, d={d}, n={n}")
    q_bar = min(1.0, max(0.0, total / n))
    lhs = math.fsum(pmf[c:d + 1].tolist())
    rhs = binomial_interval(n, int(c), int(d), q_bar)
    return HoeffdingResult(lhs, rhs, lhs >= rhs - slack)


def bias_gap_value(f: Sequence[float], tau_x: float, tau_y: float) -> float:
    """Shift of the uniform-weight win statistic caused by biased settings.

    ``f = (f00, f01, f10, f11)`` are the per-setting winning probabilities.
    """
    total = 0.0
    for (x, y), fxy in zip(itertools.product((0, 1), repeat=2), f):
        total += fxy * ((-1) ** x * tau_x / 2 + (-1) ** y * tau_y / 2
                        + (-1) ** (x + y) * tau_x * tau_y)
    return total


def bias_gap_oracle(tau: float, grid: int = 201) -> float:
    """Brute-force maximum of :func:`bias_gap_value` over the allowed biases.

    Searches the 16 corner assignments ``f in {0, 1}**4`` (the expression is
    linear in ``f``) and a ``grid x grid`` lattice on ``[-tau, tau]**2``
    that includes the endpoints.
    """
    if not 0.0 <= tau <= 0.5:
        raise DomainError(f"tau must lie in [0, 1/2], got {tau!r}")
    if grid < 2:
        raise DomainError("grid needs at least two points per axis")
    axis = np.linspace(-tau, tau, grid)
    tx, ty = np.meshgrid(axis, axis, indexing="ij")
    terms = np.stack([
        (-1) ** x * tx / 2 + (-1) ** y * ty / 2 + (-1) ** (x + y) * tx * ty
        for x, y in itertools.product((0, 1), repeat=2)
    ])
    best = -math.inf
    for f in itertools.product((0.0, 1.0), repeat=4):
        value = np.tensordot(np.asarray(f), terms, axes=1)
        best = max(best, float(value.max()))
    return best
