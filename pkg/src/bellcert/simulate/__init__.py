"""Non-IID experiment simulator and the empirical checks of the bound."""

from bellcert.simulate.engine import (
    CoverageReport,
    RunLedger,
    SettingsSource,
    coverage_counts,
    coverage_experiment,
    coverage_slack,
    run_experiment,
    simulate_batch,
)
from bellcert.simulate.oracles import (
    HoeffdingResult,
    bias_gap_oracle,
    bias_gap_value,
    exact_poisson_binomial,
    hoeffding_check,
)
from bellcert.simulate.strategies import (
    BUILTIN_STRATEGIES,
    ConstantStrategy,
    FiniteStateStrategy,
    HeraldTwoRegimeStrategy,
    ScheduledDriftStrategy,
    Strategy,
    deterministic_table,
    make_strategy,
    noisy_pr_table,
    singlet_table,
    validate_table,
    win_probability,
)

__all__ = [
    "BUILTIN_STRATEGIES",
    "ConstantStrategy",
    "CoverageReport",
    "FiniteStateStrategy",
    "HeraldTwoRegimeStrategy",
    "HoeffdingResult",
    "RunLedger",
    "ScheduledDriftStrategy",
    "SettingsSource",
    "Strategy",
    "bias_gap_oracle",
    "bias_gap_value",
    "coverage_counts",
    "coverage_experiment",
    "coverage_slack",
    "deterministic_table",
    "exact_poisson_binomial",
    "hoeffding_check",
    "make_strategy",
    "noisy_pr_table",
    "run_experiment",
    "simulate_batch",
    "singlet_table",
    "validate_table",
    "win_probability",
]
