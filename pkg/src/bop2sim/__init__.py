"""Simulation and optimisation of Bayesian optimal phase II (BOP2) trial designs."""

__version__ = "0.1.0"

from .boundaries import (
    BoundaryParams,
    Decision,
    boundary_table,
    decide,
    efficacy_threshold,
    futility_threshold,
    multiarm_futility_threshold,
)
from .design import Scenario, TrialDesign
from .engine import ArmStatus, TrialResult, run_trial
from .errors import BudgetExceededError, ConfigError, InfeasibleGridError
from .optimizer import (
    CalibrationSpec,
    IASearchSpec,
    compare_ia_strategies,
    enumerate_ia_placements,
    grid_search_lambda_gamma,
    heuristic_schedule,
)
from .posterior import BetaParams, prob_exceeds_threshold, prob_greater, prob_max
from .simulation import OperatingCharacteristics, estimate_oc

__all__ = [
    "ArmStatus",
    "BetaParams",
    "BoundaryParams",
    "BudgetExceededError",
    "CalibrationSpec",
    "ConfigError",
    "Decision",
    "IASearchSpec",
    "InfeasibleGridError",
    "OperatingCharacteristics",
    "Scenario",
    "TrialDesign",
    "TrialResult",
    "boundary_table",
    "compare_ia_strategies",
    "decide",
    "efficacy_threshold",
    "enumerate_ia_placements",
    "estimate_oc",
    "futility_threshold",
    "grid_search_lambda_gamma",
    "heuristic_schedule",
    "multiarm_futility_threshold",
    "prob_exceeds_threshold",
    "prob_greater",
    "prob_max",
    "run_trial",
]
