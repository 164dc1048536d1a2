"""
Policy-iteration driver.

Alternates operator training (TrainOperatorNode) with the argmin policy update
(PolicyUpdateNode) for n = 0..M-1, starting from u_0 = 0, and routes between them with
should_continue, the same plan/execute loop shape as a small state graph.
"""

import logging
import warnings
from typing import List, Optional, Sequence, Tuple

from hjb.catalog import terminal_family
from hjb.errors import NViolatesMonotonicityBound
from hjb.models import RunConfig
from hjb.problem import ControlProblem, TerminalCondition, sobol_points
from network.deeponet import OperatorNetwork, create_operator_network
from .nodes import PolicyUpdateNode, TrainOperatorNode, should_continue
from .policy import InitialPolicy
from .state import IterationLedger, PolicyIterationState

logger = logging.getLogger(__name__)


def check_viscosity_factor(problem: ControlProblem, N: float, strict: bool) -> None:
    """N must dominate |f|_inf / 2 for the scheme to be monotone."""
    if N < problem.f_sup_norm / 2.0:
        message = f"N={N} is below |f|_inf/2={problem.f_sup_norm / 2.0:.6g}; the scheme is not monotone"
        if strict:
            raise NViolatesMonotonicityBound(message, context={"N": N, "f_sup_norm": problem.f_sup_norm})
        logger.warning("--- %s ---", message)
        warnings.warn(message, RuntimeWarning)
    elif N < 1.0:
        logger.warning("--- N=%g is below 1 ---", N)


def prepare_run(problem: ControlProblem, config: RunConfig) -> Tuple[OperatorNetwork, List[TerminalCondition]]:
    """Sensor layout, initial operator network and the training terminal functions."""
    sensors = sobol_points(problem.box_lo, problem.box_hi, config.network.sensors, seed=config.network.seed)
    g_set = terminal_family(problem, sensors, config.terminal_family)
    return create_operator_network(problem, config.network, sensors), g_set


class PolicyIterationWorkflow:
    def __init__(self, problem: ControlProblem, g_set: Sequence[TerminalCondition], config: RunConfig):
        self.problem = problem
        self.g_set = list(g_set)
        self.config = config
        scheme = config.scheme
        self.T = scheme.T if scheme.T is not None else problem.T
        self.train_node = TrainOperatorNode(problem, self.g_set, scheme.h, scheme.N, config.training, self.T,
                                            deterministic=config.deterministic)
        self.update_node = PolicyUpdateNode(problem, scheme.h, config.argmin)
        logger.info("--- Policy iteration workflow initialized: %s, M=%d, h=%g, N=%g ---",
                    problem.name, scheme.M, scheme.h, scheme.N)

    def run(self, net: OperatorNetwork) -> IterationLedger:
        scheme = self.config.scheme
        check_viscosity_factor(self.problem, scheme.N, scheme.strict_monotonicity)
        initial_policy = InitialPolicy(self.problem)
        state: PolicyIterationState = {
            "n": 0, "M": scheme.M, "net": net, "policy": initial_policy, "iterates": [],
            "status": "training", "error_message": None, "error": None,
        }
        while True:
            action = should_continue(state)
            if action == "train":
                state.update(self.train_node(state))
            elif action == "update":
                state.update(self.update_node(state))
            else:
                break

        if state["status"] == "failed":
            logger.error("--- %s ---", state["error_message"])
            raise state["error"]

        ledger = IterationLedger(self.problem, self.g_set, initial_policy,
                                 config_snapshot=self.config.model_dump(mode="json"),
                                 operator=state["net"], h=scheme.h, N=scheme.N, T=self.T)
        for it in state["iterates"]:
            ledger.append(it)
        logger.info("--- Policy iteration completed after %d iterations ---", len(ledger))
        return ledger


def run_policy_iteration(problem: ControlProblem, g_set: Optional[Sequence[TerminalCondition]],
                         config: RunConfig, net: Optional[OperatorNetwork] = None) -> IterationLedger:
    """M rounds of (train_operator, policy_update) from u_0 = 0."""
    if g_set is None:
        default_net, g_set = prepare_run(problem, config)
        net = net if net is not None else default_net
    elif net is None:
        net = create_operator_network(problem, config.network, g_set[0].sensor_points)
    return PolicyIterationWorkflow(problem, g_set, config).run(net)
