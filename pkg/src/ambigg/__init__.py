"""Switching equilibria of global games whose players hold maxmin
preferences over a set of signal precisions."""

from .equilibrium import (
    DeletionTrace,
    EquilibriumReport,
    MinimaxReport,
    best_response_cutoff,
    two_state_example,
    cutoff_sensitivity_dy,
    dominance_bounds,
    equilibrium_cutoffs,
    fictitious_cutoff,
    iterated_deletion,
    max_cutoff_safe_action,
    minimax_cutoff,
    uniqueness_certificate,
    xi_star,
)
from .errors import (
    AmbiggError,
    AssumptionError,
    ConfigError,
    ContractError,
    ConvergenceError,
    DomainError,
    EvaluationError,
    NumericalError,
    UnsupportedError,
)
from .interim import interim_payoff, meu_payoff, meu_value, payoff_gap, smooth_aggregate
from .model import AmbiguitySet, PayoffModel, PriorFamily, linear_model, preset, validate_assumptions
from .numerics import Interval, RootSet, find_roots
from .regime import (
    CrisisScenario,
    RegimeChangeModel,
    ambiguous_cutoff,
    crisis_occurs,
    currency_model,
    debt_model,
    single_prior_cutoff,
    theta_star,
)

__version__ = "0.1.0"
