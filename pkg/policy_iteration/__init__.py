"""
Policy iteration package

Alternates physics-informed operator training with the argmin policy update, keeps the
ledger of iterates, and derives diagnostics, inferred values and synthesized trajectories
from it.
"""

from .workflow import PolicyIterationWorkflow, check_viscosity_factor, prepare_run, run_policy_iteration
from .state import IterationLedger, PolicyIterate, PolicyIterationState
from .policy import (
    AnalyticValueHandle,
    GridValueHandle,
    InducedPolicy,
    InitialPolicy,
    OperatorValueHandle,
    policy_update,
)
from .diagnostics import epsilon_bound, epsilon_report, monotonicity_check, residual_trend_check
from .synthesis import infer_value, synthesize_trajectory, value_along

__all__ = [
    "PolicyIterationWorkflow",
    "check_viscosity_factor",
    "prepare_run",
    "run_policy_iteration",
    "IterationLedger",
    "PolicyIterate",
    "PolicyIterationState",
    "AnalyticValueHandle",
    "GridValueHandle",
    "InducedPolicy",
    "InitialPolicy",
    "OperatorValueHandle",
    "policy_update",
    "epsilon_bound",
    "epsilon_report",
    "monotonicity_check",
    "residual_trend_check",
    "infer_value",
    "synthesize_trajectory",
    "value_along",
]
