"""Seeded experiment generator and Monte Carlo coverage harness.

Randomness comes from one integer seed.  Each run owns a
:class:`numpy.random.SeedSequence` that is split into three independent
substreams: setting choices, outcome sampling and herald times.  Settings
therefore never depend on the source's internal state.

Many runs are stepped together, one round at a time, with numpy arrays
indexed by run.  A coverage run ``r`` uses ``SeedSequence(seed).spawn(runs)[r]``,
so any single run can be replayed with :func:`run_experiment`.
"""

from __future__ import annotations

import json
import math
import os
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from bellcert._version import __version__
from bellcert.bell_stats import TrialRecord
from bellcert.certify import bias_correction, win_prob_lower_bound
from bellcert.exceptions import DomainError
from bellcert.simulate.strategies import WIN_MASK, Strategy

__all__ = [
    "CoverageReport",
    "RunLedger",
    "SettingsSource",
    "coverage_counts",
    "coverage_experiment",
    "coverage_slack",
    "run_experiment",
    "simulate_batch",
]

SETTINGS_MODES = ("constant", "alternating", "random")
_CHUNK = 1000


@dataclass(frozen=True)
class SettingsSource:
    """Independent setting choices with ``P(x) = 1/2 + (-1)**x * tau_x``.

    ``mode`` picks the per-round biases: ``constant`` uses ``+tau`` for both
    parties, ``alternating`` flips their sign every round, ``random`` draws
    each uniformly from ``[-tau, tau]``.
    """

    tau: float = 0.0
    mode: str = "constant"

    def __post_init__(self):
        if not 0.0 <= self.tau <= 0.5:
            raise DomainError(f"settings bias must lie in [0, 1/2], got {self.tau!r}")
        if self.mode not in SETTINGS_MODES:
            raise DomainError(f"settings mode must be one of {SETTINGS_MODES}, got {self.mode!r}")

    def biases(self, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        if self.mode == "constant":
            return np.full(n, self.tau), np.full(n, self.tau)
        if self.mode == "alternating":
            sign = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
            return sign * self.tau, -sign * self.tau
        return rng.uniform(-self.tau, self.tau, n), rng.uniform(-self.tau, self.tau, n)

    def draw(self, n: int, rng: np.random.Generator):
        """Return ``(x, y, p_x0, p_y0)`` for ``n`` rounds."""
        tau_x, tau_y = self.biases(n, rng)
        p_x0 = 0.5 + tau_x
        p_y0 = 0.5 + tau_y
        u = rng.random((2, n))
        x = (u[0] >= p_x0).astype(np.int8)
        y = (u[1] >= p_y0).astype(np.int8)
        return x, y, p_x0, p_y0

    def as_dict(self) -> dict[str, Any]:
        return {"tau": self.tau, "mode": self.mode}


def _seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)) or seed < 0:
        raise DomainError(f"seed must be a non-negative integer, got {seed!r}")
    return np.random.SeedSequence(int(seed))


def _substreams(ss: np.random.SeedSequence) -> list[np.random.SeedSequence]:
    # Same keys as a first ss.spawn(3), but without advancing ss's spawn
    # counter, so a run can be replayed from the very same SeedSequence object.
    return [np.random.SeedSequence(ss.entropy, spawn_key=(*ss.spawn_key, k),
                                   pool_size=ss.pool_size) for k in range(3)]


@dataclass
class _Batch:
    x: np.ndarray
    y: np.ndarray
    a: np.ndarray
    b: np.ndarray
    q: np.ndarray
    q_u: np.ndarray
    herald: np.ndarray | None


def simulate_batch(strategy: Strategy, settings: SettingsSource, n: int,
                   seeds: Sequence[np.random.SeedSequence],
                   herald_range: tuple[float, float] | None = None) -> _Batch:
    """Simulate ``len(seeds)`` independent runs of ``n`` rounds in lockstep."""
    if n < 1:
        raise DomainError(f"n must be at least 1, got {n!r}")
    if strategy.needs_herald_time and herald_range is None:
        raise DomainError(f"strategy {strategy.name!r} needs a herald time range")
    m = len(seeds)
    x = np.empty((m, n), dtype=np.int8)
    y = np.empty((m, n), dtype=np.int8)
    px = np.empty((m, n))
    py = np.empty((m, n))
    u = np.empty((m, n))
    herald = None if herald_range is None else np.empty((m, n))
    for j, ss in enumerate(seeds):
        s_set, s_out, s_her = (np.random.Generator(np.random.PCG64(c)) for c in _substreams(ss))
        x[j], y[j], px[j], py[j] = settings.draw(n, s_set)
        u[j] = s_out.random(n)
        if herald is not None:
            herald[j] = s_her.uniform(herald_range[0], herald_range[1], n)

    a = np.empty((m, n), dtype=np.int8)
    b = np.empty((m, n), dtype=np.int8)
    q = np.empty((m, n))
    q_u = np.empty((m, n))
    rows_idx = np.arange(m)
    states = np.full(m, strategy.initial_state(), dtype=np.int64)
    for i in range(n):
        tables = strategy.batch_tables(i, states, None if herald is None else herald[:, i])
        tables = np.broadcast_to(tables, (m, 4, 4))
        rows = 2 * x[:, i] + y[:, i]
        probs = tables[rows_idx, rows]
        cum = np.cumsum(probs, axis=1)
        k = (cum[:, :3] <= u[:, i, None]).sum(axis=1)
        a[:, i] = k >> 1
        b[:, i] = k & 1
        # f[xy] = winning probability given settings xy.
        f = (tables * WIN_MASK).sum(axis=2)
        q[:, i] = f.sum(axis=1) / 4.0
        wx0, wy0 = px[:, i], py[:, i]
        weights = np.stack([wx0 * wy0, wx0 * (1 - wy0), (1 - wx0) * wy0,
                            (1 - wx0) * (1 - wy0)], axis=1)
        q_u[:, i] = (f * weights).sum(axis=1)
        states = strategy.batch_next_state(states, i, x[:, i], y[:, i], a[:, i], b[:, i])
    return _Batch(x, y, a, b, q, q_u, herald)


@dataclass
class RunLedger:
    """Records of one simulated run plus the ground truth behind them.

    ``q_conditional[i]`` is the winning probability of round ``i`` with
    uniformly weighted settings, given the realised past.  ``q_uniform_stat[i]``
    is the expectation of the win indicator under the settings distribution
    actually used; the two coincide for unbiased settings.
    """

    records: tuple[TrialRecord, ...]
    q_conditional: np.ndarray
    q_uniform_stat: np.ndarray
    strategy: dict[str, Any] = field(default_factory=dict)
    settings: dict[str, Any] = field(default_factory=dict)
    seed: Any = None

    @property
    def n(self) -> int:
        return len(self.records)

    @property
    def q_bar(self) -> float:
        return math.fsum(self.q_conditional.tolist()) / self.n

    @property
    def win_count(self) -> int:
        return sum((r.a ^ r.b) == (r.x & r.y) for r in self.records)

    def truth_dict(self) -> dict[str, Any]:
        return {
            "tool_version": __version__,
            "strategy": self.strategy,
            "settings": self.settings,
            "seed": self.seed,
            "n": self.n,
            "q_bar": self.q_bar,
            "s_bar": 8.0 * self.q_bar - 4.0,
            "q_conditional": [float(v) for v in self.q_conditional],
            "q_uniform_stat": [float(v) for v in self.q_uniform_stat],
        }

    def truth_json(self) -> str:
        return json.dumps(self.truth_dict(), sort_keys=True, indent=2) + "\n"


def run_experiment(strategy: Strategy, settings_source: SettingsSource, n: int, seed,
                   herald_range: tuple[float, float] | None = None) -> RunLedger:
    """Simulate one run; identical arguments give an identical ledger."""
    ss = _seed_sequence(seed)
    batch = simulate_batch(strategy, settings_source, n, [ss], herald_range)
    records = tuple(
        TrialRecord(i, int(batch.x[0, i]), int(batch.y[0, i]), int(batch.a[0, i]),
                    int(batch.b[0, i]),
                    herald_time=None if batch.herald is None else float(batch.herald[0, i]))
        for i in range(n))
    seed_echo = seed if isinstance(seed, (int, np.integer)) else {
        "entropy": ss.entropy, "spawn_key": list(ss.spawn_key)}
    return RunLedger(records, batch.q[0].copy(), batch.q_u[0].copy(), strategy.describe(),
                     settings_source.as_dict(), seed_echo)


def coverage_slack(alpha: float, runs: int) -> float:
    """Three binomial standard errors of an empirical coverage estimate."""
    return 3.0 * math.sqrt(alpha * (1.0 - alpha) / runs)


def _chunk_summary(strategy, settings, n, seeds, herald_range):
    batch = simulate_batch(strategy, settings, n, seeds, herald_range)
    wins = ((batch.a ^ batch.b) == (batch.x & batch.y)).sum(axis=1)
    q_bar = batch.q.mean(axis=1)
    return wins, q_bar


def _run_summaries(strategy, settings, n, runs, seed, herald_range, workers):
    children = _seed_sequence(seed).spawn(runs)
    chunks = [children[i:i + _CHUNK] for i in range(0, runs, _CHUNK)]
    if workers > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_chunk_summary, [strategy] * len(chunks),
                                  [settings] * len(chunks), [n] * len(chunks), chunks,
                                  [herald_range] * len(chunks)))
    else:
        parts = [_chunk_summary(strategy, settings, n, c, herald_range) for c in chunks]
    wins = np.concatenate([p[0] for p in parts])
    q_bar = np.concatenate([p[1] for p in parts])
    return wins, q_bar


@dataclass(frozen=True)
class CoverageReport:
    strategy: dict[str, Any]
    settings: dict[str, Any]
    n: int
    runs: int
    seed: int
    bias_corrected: bool
    covered: dict[float, int]

    def coverage(self, alpha: float) -> float:
        return self.covered[alpha] / self.runs

    def threshold(self, alpha: float) -> float:
        return 1.0 - alpha - coverage_slack(alpha, self.runs)

    def passed(self, alpha: float) -> bool:
        return self.coverage(alpha) >= self.threshold(alpha)

    def to_dict(self) -> dict[str, Any]:
        return {
            "tool_version": __version__,
            "strategy": self.strategy,
            "settings": self.settings,
            "n": self.n,
            "runs": self.runs,
            "seed": self.seed,
            "bias_corrected": self.bias_corrected,
            "results": [
                {"alpha": al, "covered": self.covered[al],
                 "empirical_coverage": self.coverage(al),
                 "threshold": self.threshold(al), "pass": self.passed(al)}
                for al in sorted(self.covered)
            ],
        }


def coverage_counts(strategy: Strategy, settings_source: SettingsSource, n: int,
                    alphas: Sequence[float], runs: int, seed: int,
                    herald_range: tuple[float, float] | None = None,
                    correct_bias: bool = True, workers: int = 1) -> CoverageReport:
    """Count runs whose lower bound does not exceed the realised average ``q``.

    The same simulated runs are scored at every ``alpha``.  With
    ``correct_bias`` the bound is lowered by ``tau + tau**2`` of the settings
    source before comparison.
    """
    if runs < 1:
        raise DomainError(f"runs must be positive, got {runs!r}")
    wins, q_bar = _run_summaries(strategy, settings_source, n, runs, seed, herald_range,
                                 max(1, int(workers)))
    shift = bias_correction(settings_source.tau) if correct_bias else 0.0
    covered = {}
    for alpha in alphas:
        cache: dict[int, float] = {}
        hits = 0
        for w, qb in zip(wins.tolist(), q_bar.tolist()):
            if w not in cache:
                cache[w] = win_prob_lower_bound(n, w, alpha) - shift
            hits += cache[w] <= qb
        covered[float(alpha)] = hits
    return CoverageReport(strategy.describe(), settings_source.as_dict(), n, runs, seed,
                          correct_bias, covered)


def coverage_experiment(strategy: Strategy, settings_source: SettingsSource, n: int,
                        alpha: float, runs: int, seed: int, **kwargs) -> float:
    """Empirical probability that the lower bound holds, over ``runs`` runs."""
    report = coverage_counts(strategy, settings_source, n, [alpha], runs, seed, **kwargs)
    return report.coverage(float(alpha))


def default_workers() -> int:
    return os.cpu_count() or 1
