"""Device-independent certification of Bell-state fidelity from finite,
non-IID Bell-test data."""

from bellcert._version import __version__
from bellcert.bell_stats import (
    CONVENTIONS,
    IDENTITY,
    CorrelatorTable,
    RelabellingConvention,
    TrialRecord,
    chsh_from_correlators,
    correlator_table,
    effective_chsh,
    mean_win_statistic,
    win_indicator,
)
from bellcert.certify import (
    Certificate,
    CertificationConfig,
    bias_correction,
    certify,
    chsh_lower_bound,
    fidelity_from_chsh,
    max_confidence_for_threshold,
    win_prob_lower_bound,
)
from bellcert.estimators import CHSHCertifier, WindowFilter, WinIndicator
from bellcert.exceptions import (
    BellCertError,
    ConfigError,
    ConvergenceError,
    DomainError,
    EmptyDatasetError,
    MissingHeraldTimeError,
    ParseError,
)
from bellcert.ingest import Dataset, PreselectionWindow, filter_window, load_dataset, sweep_windows

__all__ = [
    "CONVENTIONS",
    "IDENTITY",
    "BellCertError",
    "CHSHCertifier",
    "Certificate",
    "CertificationConfig",
    "ConfigError",
    "ConvergenceError",
    "CorrelatorTable",
    "Dataset",
    "DomainError",
    "EmptyDatasetError",
    "MissingHeraldTimeError",
    "ParseError",
    "PreselectionWindow",
    "RelabellingConvention",
    "TrialRecord",
    "WinIndicator",
    "WindowFilter",
    "__version__",
    "bias_correction",
    "certify",
    "chsh_from_correlators",
    "chsh_lower_bound",
    "correlator_table",
    "effective_chsh",
    "fidelity_from_chsh",
    "filter_window",
    "load_dataset",
    "max_confidence_for_threshold",
    "mean_win_statistic",
    "sweep_windows",
    "win_indicator",
    "win_prob_lower_bound",
]
