"""
Policy-iteration nodes.

Each node takes the current PolicyIterationState and returns the updates to merge into it.
"""

import logging
from typing import Any, Dict, Optional, Sequence

import numpy as np

from hjb.errors import SolverError
from hjb.models import ArgminConfig, TrainConfig
from hjb.problem import ControlProblem, TerminalCondition
from network.adam import AdamState
from network.training import train_operator
from .policy import OperatorValueHandle, policy_update
from .state import PolicyIterate, PolicyIterationState

logger = logging.getLogger(__name__)


class TrainOperatorNode:
    """
    Trains the operator for the current policy u_n, warm-started from the previous
    parameters with a fresh Adam state, and records the iterate.
    """

    def __init__(self, problem: ControlProblem, g_set: Sequence[TerminalCondition], h: float, N: float,
                 schedule: TrainConfig, T: Optional[float] = None, deterministic: bool = True):
        self.problem = problem
        self.g_set = list(g_set)
        self.h = h
        self.N = N
        self.schedule = schedule
        self.T = T
        # collocation draws come from OS entropy unless the run is deterministic
        self.rng = np.random.default_rng(schedule.seed if deterministic else None)

    def __call__(self, state: PolicyIterationState) -> Dict[str, Any]:
        n = state["n"]
        logger.info("--- Policy iteration n=%d: training operator ---", n)
        try:
            opt = AdamState.for_parameters(state["net"].parameters(), lr=self.schedule.lr, beta1=self.schedule.beta1,
                                           beta2=self.schedule.beta2, eps=self.schedule.eps)
            net, report = train_operator(state["net"], self.g_set, state["policy"], None, self.h, self.N,
                                         self.problem, opt, self.schedule, rng=self.rng, T=self.T)
        except SolverError as e:
            return {"status": "failed", "error_message": f"Training failed at n={n}: {e.message}", "error": e}

        iterates = state["iterates"].copy()
        iterates.append(PolicyIterate(n, OperatorValueHandle(net), report.eps1_hat, report.eps2_hat, report))
        return {"net": net, "iterates": iterates, "status": "updating", "error_message": None}


class PolicyUpdateNode:
    """u_{n+1} = argmin against the stencil gradient of the value just trained."""

    def __init__(self, problem: ControlProblem, h: float, solver: ArgminConfig):
        self.problem = problem
        self.h = h
        self.solver = solver

    def __call__(self, state: PolicyIterationState) -> Dict[str, Any]:
        latest = state["iterates"][-1]
        logger.info("--- Policy iteration n=%d: updating policy ---", latest.n)
        return {"policy": policy_update(latest.value, self.problem, self.h, self.solver),
                "n": state["n"] + 1, "status": "training"}


def should_continue(state: PolicyIterationState) -> str:
    """Routing after each node: 'train', 'update' or 'end'."""
    if state["status"] in ("failed", "completed"):
        return "end"
    if state["status"] == "updating":
        return "update"
    if state["n"] >= state["M"]:
        return "end"
    return "train"
