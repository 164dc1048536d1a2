"""
Inference and feedback-control synthesis from a finished ledger.
"""

import logging
import warnings
from typing import Optional

import numpy as np
import pandas as pd

from hjb import config
from hjb.errors import ConfigError, TrajectoryEscapedDomain
from hjb.models import ArgminConfig
from hjb.problem import TerminalCondition
from network.deeponet import check_sensors, operator_eval
from solvers.transcription import TrajectorySolution
from .policy import OperatorValueHandle, ValueHandle, policy_update
from .state import IterationLedger

logger = logging.getLogger(__name__)


def infer_value(ledger: IterationLedger, g_new: TerminalCondition, t, x: np.ndarray) -> np.ndarray:
    """Evaluate the final operator on a new terminal function. No optimizer state is touched."""
    if ledger.operator is None:
        raise ConfigError("ledger has no trained operator")
    check_sensors(ledger.operator, g_new)
    return operator_eval(ledger.operator, g_new, t, np.asarray(x, dtype=float))


def final_value_handle(ledger: IterationLedger) -> ValueHandle:
    """The operator if the ledger has one, otherwise its last iterate (grid ledgers)."""
    if ledger.operator is not None:
        return OperatorValueHandle(ledger.operator)
    if not ledger.iterates:
        raise ConfigError("ledger has neither an operator nor any iterate")
    return ledger.iterates[-1].value


def _rollout_steps(T: float, dt: float) -> int:
    if dt <= 0:
        raise ConfigError(f"rollout dt must be positive, got {dt}")
    steps = int(round(T / dt))
    if steps < 1 or abs(steps * dt - T) > 1e-9 * max(T, 1.0):
        raise ConfigError(f"dt={dt} does not divide T={T}")
    return steps


def synthesize_trajectory(ledger: IterationLedger, g_new: TerminalCondition, x0: np.ndarray,
                          dt: Optional[float] = None, solver: Optional[ArgminConfig] = None) -> TrajectorySolution:
    """
    Forward Euler under the feedback u_k = argmin against grad_h V(t_k, x_k).

    A state leaving the inflated working box is warned about once, then the value and
    control are evaluated at its projection onto that box while the rollout continues.
    """
    problem = ledger.problem
    T = ledger.horizon
    dt = T / config.ROLLOUT_STEPS if dt is None else float(dt)
    steps = _rollout_steps(T, dt)
    if ledger.operator is not None:
        check_sensors(ledger.operator, g_new)
    policy = policy_update(final_value_handle(ledger), problem, ledger.h, solver)

    center = 0.5 * (problem.box_lo + problem.box_hi)
    half = 0.5 * (problem.box_hi - problem.box_lo) * config.ESCAPE_INFLATION
    lo, hi = center - half, center + half

    x0 = np.asarray(x0, dtype=float)
    recorded = []
    if np.any(x0 < problem.box_lo) or np.any(x0 > problem.box_hi):
        recorded.append(f"initial state {x0.tolist()} is outside the working box")
        warnings.warn(recorded[-1], TrajectoryEscapedDomain)

    states = np.empty((steps + 1, problem.d))
    controls = np.empty((steps, problem.m))
    stage = np.empty(steps)
    states[0] = x0
    escaped = False
    for k in range(steps):
        t = k * dt
        x = states[k]
        if not escaped and (np.any(x < lo) or np.any(x > hi)):
            escaped = True
            recorded.append(f"trajectory left the inflated working box at step {k} (t={t:.6g})")
            logger.warning("--- %s ---", recorded[-1])
            warnings.warn(recorded[-1], TrajectoryEscapedDomain)
        x_eval = np.clip(x, lo, hi)
        u = problem.control_set.project(policy.evaluate(t, x_eval[None, :], g_new)[0])
        controls[k] = u
        stage[k] = dt * float(problem.running_cost(t, x, u))
        states[k + 1] = x + dt * problem.dynamics(t, x, u)

    terminal = float(g_new(states[-1]))
    times = np.arange(steps + 1) * dt
    logger.info("--- Synthesized %d-step trajectory from %s: cost %.6g ---", steps,
                np.array2string(x0, precision=3), float(np.sum(stage)) + terminal)
    return TrajectorySolution(states, controls, float(np.sum(stage)) + terminal, True, steps, times,
                              stage, terminal, warnings=recorded)


def value_along(ledger: IterationLedger, g_new: TerminalCondition, solution: TrajectorySolution) -> pd.DataFrame:
    """V(t_k, x_k) along a synthesized trajectory, with states clamped into the inflated box."""
    problem = ledger.problem
    center = 0.5 * (problem.box_lo + problem.box_hi)
    half = 0.5 * (problem.box_hi - problem.box_lo) * config.ESCAPE_INFLATION
    x = np.clip(solution.states, center - half, center + half)
    values = final_value_handle(ledger).value(solution.times, x, g_new)
    return pd.DataFrame({"k": np.arange(len(solution.times)), "t_k": solution.times, "value": np.asarray(values)})
