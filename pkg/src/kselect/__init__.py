"""Choosing k of n independent random variables to maximize the expected largest or second-largest value."""
from .distributions import (
    ContinuousFamily,
    DiscreteDistribution,
    cdf,
    derive_seed,
    discretize,
    empirical_from_samples,
    make_rng,
    mean,
    quantile_alpha,
    quantile_alpha_sqrt,
    sample,
    tail_contribution,
    truncate_at_quantile,
)
from .exact import (
    Instance,
    NumberMode,
    Objective,
    OracleTooLarge,
    brute_force_opt,
    expected_max,
    expected_smax,
    monte_carlo,
    tail_prob_max,
)

from .selectors import (
    SelectionResult,
    select_expectation,
    select_greedy,
    select_kr_best_of_samples,
    select_kr_top_quantile,
    select_quantile,
)
from .ptas import PtasConfig, ptas_select
from .anchoring import compute_beta

__all__ = [
    "ContinuousFamily", "DiscreteDistribution", "cdf", "derive_seed", "discretize",
    "empirical_from_samples", "make_rng", "mean", "quantile_alpha", "quantile_alpha_sqrt",
    "sample", "tail_contribution", "truncate_at_quantile",
    "Instance", "NumberMode", "Objective", "OracleTooLarge", "brute_force_opt",
    "expected_max", "expected_smax", "monte_carlo", "tail_prob_max",
    "SelectionResult", "select_expectation", "select_greedy", "select_kr_best_of_samples",
    "select_kr_top_quantile", "select_quantile", "PtasConfig", "ptas_select", "compute_beta",
]

__version__ = "0.1.0"
