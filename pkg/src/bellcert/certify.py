"""Lower confidence bounds on the average CHSH value and Bell-state fidelity.

The chain, for ``n`` rounds of which ``w`` won the CHSH game:

1. ``q_hat = I^{-1}_alpha(w - 1, n - w + 2)`` bounds the average winning
   probability from below with confidence ``1 - alpha`` whatever the
   round-to-round dependence (``q_hat = 0`` when ``w <= 1``).
2. Setting-choice bias of at most ``tau`` per party lowers the bound by
   ``tau + tau**2``.
3. ``S_hat = 8 * (q_hat - tau - tau**2) - 4`` bounds the average CHSH value.
4. ``F_hat = f(S_hat)`` with
   ``f(S) = max(40, 12 + (4 + 5 sqrt 2)(5 S - 8)) / 80`` bounds the average
   singlet fidelity.
"""

from __future__ import annotations

import json
import logging
import math
from collections.abc import Mapping, Sequence
from dataclasses import asdict, dataclass, field, replace
from decimal import ROUND_FLOOR, Decimal
from typing import Any

from bellcert._version import __version__
from bellcert.bell_stats import (
    ConventionSpec,
    RelabellingConvention,
    TrialRecord,
    win_count,
)
from bellcert.exceptions import DomainError, EmptyDatasetError
from bellcert.ingest import Dataset, PreselectionWindow, filter_window
from bellcert.specfun import reg_inc_beta_inv

__all__ = [
    "TSIRELSON",
    "FIDELITY_THRESHOLD_CHSH",
    "Certificate",
    "CertificationConfig",
    "bias_correction",
    "certify",
    "chsh_for_fidelity",
    "chsh_lower_bound",
    "fidelity_from_chsh",
    "max_confidence_for_threshold",
    "truncate",
    "win_prob_lower_bound",
]

logger = logging.getLogger(__name__)

TSIRELSON = 2.0 * math.sqrt(2.0)
_SLOPE = 4.0 + 5.0 * math.sqrt(2.0)
_TSIRELSON_GRACE = 1e-9
# Smallest CHSH value at which the fidelity bound exceeds 1/2.
FIDELITY_THRESHOLD_CHSH = 8.0 / 5.0 + 28.0 / (5.0 * _SLOPE)


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha <= 0.5:
        raise DomainError(
            f"alpha must satisfy 0 < alpha <= 1/2 (the confidence bound is only valid there), "
            f"got {alpha!r}")
    return alpha


def _check_tau(tau: float) -> float:
    tau = float(tau)
    if not 0.0 <= tau < 0.5:
        raise DomainError(f"tau must satisfy 0 <= tau < 1/2, got {tau!r}")
    return tau


def _convention_echo(conv: ConventionSpec) -> Any:
    if isinstance(conv, Mapping):
        return {k: _convention_echo(v) for k, v in sorted(conv.items())}
    if isinstance(conv, RelabellingConvention):
        return conv.id
    return int(conv)


@dataclass(frozen=True)
class CertificationConfig:
    """Significance level, settings-bias bound, CHSH convention and window.

    ``convention`` is a convention id (0..7), a :class:`RelabellingConvention`,
    or a mapping from herald state to either.  It must be fixed before the
    data are looked at.
    """

    alpha: float = 0.01
    tau: float = 0.0
    convention: ConventionSpec = 0
    window: PreselectionWindow | None = None

    def __post_init__(self):
        _check_alpha(self.alpha)
        _check_tau(self.tau)
        conv = self.convention
        if isinstance(conv, Mapping):
            object.__setattr__(self, "convention", {
                str(k): v if isinstance(v, RelabellingConvention) else RelabellingConvention(v)
                for k, v in conv.items()})
        elif not isinstance(conv, RelabellingConvention):
            object.__setattr__(self, "convention", RelabellingConvention(conv))

    def with_(self, **changes) -> "CertificationConfig":
        return replace(self, **changes)

    def as_dict(self) -> dict[str, Any]:
        return {
            "alpha": self.alpha,
            "tau": self.tau,
            "convention": _convention_echo(self.convention),
            "window": None if self.window is None else self.window.as_dict(),
        }


def truncate(value: float, places: int = 4) -> str:
    """Decimal string of ``value`` rounded towards minus infinity."""
    quantum = Decimal(1).scaleb(-places)
    return str(Decimal(repr(float(value))).quantize(quantum, rounding=ROUND_FLOOR))


@dataclass(frozen=True)
class Certificate:
    """Immutable result of :func:`certify` with every intermediate value.

    ``s_hat_capped`` is true when the statistical bound on the CHSH value came
    out above the quantum maximum; the fidelity map is then applied to the
    quantum maximum instead, which is still a valid lower bound.
    """

    n: int
    win_count: int
    t_bar: float
    s_bar_u: float
    q_hat: float
    s_hat: float
    f_hat: float
    alpha: float
    tau: float
    convention: Any
    window: dict[str, float] | None
    dataset_sha256: str
    s_hat_capped: bool = False
    tool_version: str = __version__
    extra: dict[str, Any] = field(default_factory=dict)

    @property
    def confidence(self) -> float:
        return 1.0 - self.alpha

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def to_json(self) -> str:
        """Canonical key-ordered JSON document."""
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def summary(self) -> str:
        lines = [
            f"events n            : {self.n}",
            f"wins                : {self.win_count}",
            f"CHSH (uniform) S_u  : {self.s_bar_u:.4f}",
            f"confidence level    : {self.confidence:.10g}",
            f"settings bias tau   : {self.tau:g}",
            f"CHSH lower bound    : {truncate(self.s_hat)}",
            f"fidelity lower bound: {truncate(self.f_hat)}",
        ]
        if self.s_hat_capped:
            lines.append("note: CHSH bound exceeded 2*sqrt(2); fidelity evaluated at 2*sqrt(2)")
        return "\n".join(lines)


def win_prob_lower_bound(n: int, win_count: int, alpha: float) -> float:
    """Lower confidence bound on the average winning probability.

    Valid at level ``1 - alpha`` without assuming independent or identically
    distributed rounds.  Returns 0 when fewer than two rounds were won.
    """
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n!r}")
    if isinstance(win_count, bool) or int(win_count) != win_count or not 0 <= win_count <= n:
        raise DomainError(f"win_count must be an integer in [0, {n}], got {win_count!r}")
    alpha = _check_alpha(alpha)
    n, win_count = int(n), int(win_count)
    if win_count <= 1:
        return 0.0
    return reg_inc_beta_inv(alpha, win_count - 1, n - win_count + 2)


def bias_correction(tau: float) -> float:
    """Maximal shift ``tau + tau**2`` of the winning probability under setting bias."""
    tau = float(tau)
    if not 0.0 <= tau <= 0.5:
        raise DomainError(f"tau must lie in [0, 1/2], got {tau!r}")
    return tau + tau * tau


def chsh_lower_bound(n: int, s_bar_u: float, tau: float, alpha: float) -> float:
    """Lower confidence bound on the average CHSH value from ``n`` and ``S_u``.

    ``n * t`` with ``t = (4 + s_bar_u) / 8`` need not be an integer; the beta
    shapes are used as real numbers.
    """
    if isinstance(n, bool) or n < 1:
        raise DomainError(f"n must be at least 1, got {n!r}")
    alpha = _check_alpha(alpha)
    tau = _check_tau(tau)
    t_bar = (4.0 + float(s_bar_u)) / 8.0
    if not -1e-12 <= t_bar <= 1.0 + 1e-12:
        raise DomainError(f"s_bar_u must lie in [-4, 4], got {s_bar_u!r}")
    t_bar = min(1.0, max(0.0, t_bar))
    shape_a = n * t_bar - 1.0
    q_hat = 0.0 if shape_a <= 0.0 else reg_inc_beta_inv(alpha, shape_a, n * (1.0 - t_bar) + 2.0)
    return 8.0 * (q_hat - bias_correction(tau)) - 4.0


def fidelity_from_chsh(s: float) -> float:
    """Singlet-fidelity lower bound implied by a CHSH value ``s <= 2 sqrt 2``."""
    s = float(s)
    if math.isnan(s) or s > TSIRELSON + _TSIRELSON_GRACE:
        raise DomainError(f"CHSH value {s!r} exceeds the quantum maximum 2*sqrt(2)")
    value = max(40.0, 12.0 + _SLOPE * (5.0 * s - 8.0)) / 80.0
    return min(1.0, value)


def chsh_for_fidelity(f_target: float) -> float:
    """CHSH value at which the linear branch of the fidelity bound equals ``f_target``."""
    f_target = float(f_target)
    if not 0.5 <= f_target <= 1.0:
        raise DomainError(f"f_target must lie in [1/2, 1], got {f_target!r}")
    return 8.0 / 5.0 + (80.0 * f_target - 12.0) / (5.0 * _SLOPE)


def _as_dataset(records) -> Dataset:
    if isinstance(records, Dataset):
        return records
    return Dataset(tuple(records))


def certify(records: Dataset | Sequence[TrialRecord], config: CertificationConfig) -> Certificate:
    """Run the full pipeline on a record sequence.

    Optional window filter, win count, winning-probability bound, bias
    correction, CHSH bound and fidelity bound; every stage is kept on the
    returned :class:`Certificate`.
    """
    dataset = _as_dataset(records)
    if config.window is not None:
        dataset = filter_window(dataset, config.window)
    wins, n = win_count(dataset.records, config.convention)
    if n == 0:
        raise EmptyDatasetError("cannot certify an empty dataset")
    t_bar = wins / n
    s_bar_u = 8.0 * t_bar - 4.0
    q_hat = win_prob_lower_bound(n, wins, config.alpha)
    s_hat = 8.0 * (q_hat - bias_correction(config.tau)) - 4.0
    capped = s_hat > TSIRELSON
    if capped:
        logger.warning("CHSH lower bound %.6f exceeds 2*sqrt(2); capping for the fidelity map",
                       s_hat)
    f_hat = fidelity_from_chsh(min(s_hat, TSIRELSON))
    return Certificate(
        n=n,
        win_count=wins,
        t_bar=t_bar,
        s_bar_u=s_bar_u,
        q_hat=q_hat,
        s_hat=s_hat,
        f_hat=f_hat,
        alpha=config.alpha,
        tau=config.tau,
        convention=_convention_echo(config.convention),
        window=None if config.window is None else config.window.as_dict(),
        dataset_sha256=dataset.sha256,
        s_hat_capped=capped,
    )


_ALPHA_FLOOR = 1e-15


def max_confidence_for_threshold(n: int, s_bar_u: float, tau: float, f_target: float) -> float:
    """Largest confidence level ``1 - alpha`` at which the fidelity target is certified.

    The target counts as reached when the CHSH bound lies on or above the
    point where the linear branch of the fidelity map equals ``f_target``; for
    ``f_target = 1/2`` this means leaving the trivial region.  Returns 0.5 when
    not even ``alpha = 1/2`` suffices.  Confidence levels beyond
    ``1 - 1e-15`` are not resolved.
    """
    s_star = chsh_for_fidelity(f_target)
    _check_tau(tau)

    def reached(alpha: float) -> bool:
        return chsh_lower_bound(n, s_bar_u, tau, alpha) >= s_star

    if not reached(0.5):
        return 0.5
    if reached(_ALPHA_FLOOR):
        return 1.0 - _ALPHA_FLOOR
    lo, hi = math.log(_ALPHA_FLOOR), math.log(0.5)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if reached(math.exp(mid)):
            hi = mid
        else:
            lo = mid
        if hi - lo < 1e-12:
            break
    return 1.0 - math.exp(hi)
