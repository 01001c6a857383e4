"""scikit-learn style front end.

``CHSHCertifier`` fits a fidelity certificate to trial data; ``WindowFilter``
and ``WinIndicator`` are stateless transformers so pre-selection and win
scoring can sit in a :class:`sklearn.pipeline.Pipeline`.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from bellcert.bell_stats import IDENTITY, resolve_convention
from bellcert.certify import CertificationConfig, certify
from bellcert.ingest import filter_window
from bellcert.validation import check_convention, check_records, check_window

__all__ = ["CHSHCertifier", "WinIndicator", "WindowFilter"]


class CHSHCertifier(BaseEstimator):
    """Certify a lower bound on the average Bell-state fidelity.

    Parameters
    ----------
    alpha : float, default=0.01
        One minus the confidence level; must lie in (0, 1/2].
    tau : float, default=0.0
        Bound on each party's setting bias, ``|P(x) - 1/2| <= tau``.
    convention : int or dict, default=0
        CHSH relabelling convention id, or a mapping from herald state to id.
    window : tuple of float, optional
        Acceptance window ``(t_s, t_e)`` in ns applied before counting.

    Attributes
    ----------
    certificate_ : Certificate
    n_, win_count_, s_bar_u_, q_hat_, s_hat_, f_hat_
        Copies of the certificate fields.
    """

    def __init__(self, alpha=0.01, tau=0.0, convention=0, window=None):
        self.alpha = alpha
        self.tau = tau
        self.convention = convention
        self.window = window

    def _config(self) -> CertificationConfig:
        return CertificationConfig(alpha=self.alpha, tau=self.tau,
                                   convention=check_convention(self.convention),
                                   window=check_window(self.window))

    def fit(self, X, y=None):
        cert = certify(check_records(X), self._config())
        self.certificate_ = cert
        self.n_ = cert.n
        self.win_count_ = cert.win_count
        self.s_bar_u_ = cert.s_bar_u
        self.q_hat_ = cert.q_hat
        self.s_hat_ = cert.s_hat
        self.f_hat_ = cert.f_hat
        return self

    def score(self, X, y=None) -> float:
        """Certified fidelity of ``X`` under this estimator's settings."""
        check_is_fitted(self, "certificate_")
        return certify(check_records(X), self._config()).f_hat


class WindowFilter(TransformerMixin, BaseEstimator):
    """Keep records whose herald time lies in ``[t_s, t_e]``."""

    def __init__(self, t_s=0.0, t_e=np.inf, strict=True):
        self.t_s = t_s
        self.t_e = t_e
        self.strict = strict

    def fit(self, X, y=None):
        self.window_ = check_window((self.t_s, self.t_e))
        return self

    def transform(self, X):
        check_is_fitted(self, "window_")
        return filter_window(check_records(X), self.window_, strict=self.strict)


class WinIndicator(TransformerMixin, BaseEstimator):
    """Map each record to its CHSH win indicator (0 or 1)."""

    def __init__(self, convention=0):
        self.convention = convention

    def fit(self, X, y=None):
        self.convention_ = check_convention(self.convention) if self.convention is not None \
            else IDENTITY
        return self

    def transform(self, X):
        check_is_fitted(self, "convention_")
        out = []
        for r in check_records(X):
            rr = resolve_convention(self.convention_, r).apply(r)
            out.append((rr.a ^ rr.b) == (rr.x & rr.y))
        return np.asarray(out, dtype=np.int8)
