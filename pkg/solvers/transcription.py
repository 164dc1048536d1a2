"""
Direct transcription reference values.

States are eliminated by forward Euler, x_{k+1} = x_k + dt f(t_k, x_k, u_k), so the only
decision variables are the controls u_0..u_{l-1}. The transcribed objective
    J(u) = sum_k dt L(t_k, x_k, u_k) + g(x_l)
is minimized by projected gradient descent with Armijo backtracking from several starts;
gradients come from the discrete adjoint recursion.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd

from hjb import config
from hjb.errors import NotConverged
from hjb.models import PGDConfig
from hjb.problem import ControlProblem, TerminalCondition

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TranscriptionProblem:
    problem: ControlProblem
    g: TerminalCondition
    x0: np.ndarray
    steps: int = config.TRANSCRIPTION_STEPS
    T: Optional[float] = None

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("transcription needs at least one step")
        object.__setattr__(self, "x0", np.asarray(self.x0, dtype=float))
        if self.T is None:
            object.__setattr__(self, "T", self.problem.T)

    @property
    def dt(self) -> float:
        return self.T / self.steps

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.steps + 1) * self.dt


@dataclass
class TrajectorySolution:
    states: np.ndarray                 # (l + 1, d)
    controls: np.ndarray               # (l, m)
    objective: float
    converged: bool
    iterations: int
    times: np.ndarray
    stage_costs: np.ndarray            # (l,) running cost rate times dt
    terminal_cost: float
    warnings: List[str] = field(default_factory=list)
    history: List[float] = field(default_factory=list)

    @property
    def running_cost(self) -> float:
        return float(np.sum(self.stage_costs))

    def to_frame(self) -> pd.DataFrame:
        """One row per time node; the last row carries the final state and no control."""
        n, d = self.states.shape
        m = self.controls.shape[1]
        data = {"k": np.arange(n), "t_k": self.times}
        for i in range(d):
            data[f"x{i}"] = self.states[:, i]
        for j in range(m):
            data[f"u{j}"] = np.append(self.controls[:, j], np.nan)
        data["stage_cost"] = np.append(self.stage_costs, np.nan)
        return pd.DataFrame(data)


def simulate(tp: TranscriptionProblem, controls: np.ndarray) -> Tuple[np.ndarray, np.ndarray, float]:
    """Forward Euler rollout: states, per-step costs dt * L, terminal cost."""
    p = tp.problem
    dt = tp.dt
    states = np.empty((tp.steps + 1, p.d))
    states[0] = tp.x0
    stage = np.empty(tp.steps)
    for k in range(tp.steps):
        t = k * dt
        stage[k] = dt * float(p.running_cost(t, states[k], controls[k]))
        states[k + 1] = states[k] + dt * p.dynamics(t, states[k], controls[k])
    return states, stage, float(tp.g(states[-1]))


def objective(tp: TranscriptionProblem, controls: np.ndarray) -> float:
    _, stage, terminal = simulate(tp, controls)
    return float(np.sum(stage)) + terminal


def adjoint_gradient(tp: TranscriptionProblem, controls: np.ndarray) -> np.ndarray:
    """Exact gradient of the transcribed objective with respect to every control."""
    p = tp.problem
    dt = tp.dt
    controls = np.asarray(controls, dtype=float)
    states, _, _ = simulate(tp, controls)
    lam = np.asarray(tp.g.grad(states[-1]), dtype=float)
    grad = np.empty_like(controls)
    for k in range(tp.steps - 1, -1, -1):
        t = k * dt
        x, u = states[k], controls[k]
        fx = p.f_x(t, x, u)
        fu = p.f_u(t, x, u)
        grad[k] = dt * p.L_u(t, x, u) + dt * fu.T @ lam
        lam = dt * p.L_x(t, x, u) + lam + dt * fx.T @ lam
    return grad


def _stationarity(tp: TranscriptionProblem, u: np.ndarray, grad: np.ndarray) -> float:
    cs = tp.problem.control_set
    if cs.periodic:
        return float(np.linalg.norm(grad))
    return float(np.linalg.norm(u - cs.project(u - grad)))


def _solve_from(tp: TranscriptionProblem, u: np.ndarray, solver: PGDConfig) -> TrajectorySolution:
    cs = tp.problem.control_set
    u = cs.project(u)
    J = objective(tp, u)
    history = [J]
    converged = False
    stop_reasons: List[str] = []
    iterations = 0
    for iterations in range(1, solver.max_iter + 1):
        grad = adjoint_gradient(tp, u)
        if _stationarity(tp, u, grad) < solver.tol:
            converged = True
            break
        step = solver.initial_step
        accepted = False
        for _ in range(config.ARMIJO_MAX_HALVINGS):
            trial = cs.project(u - step * grad)
            if cs.periodic:
                decrease = -step * float(np.sum(grad * grad))
            else:
                decrease = float(np.sum(grad * (trial - u)))
            J_trial = objective(tp, trial)
            if J_trial <= J + solver.armijo_c * decrease and J_trial <= J:
                accepted = True
                break
            step *= solver.shrink
        if not accepted:
            stop_reasons.append(f"line search found no descent step at iteration {iterations} "
                                f"(stationarity {_stationarity(tp, u, grad):.3g})")
            break
        u, J = trial, J_trial
        history.append(J)

    states, stage, terminal = simulate(tp, u)
    return TrajectorySolution(states, u, float(np.sum(stage)) + terminal, converged, iterations,
                              tp.times, stage, terminal, warnings=stop_reasons, history=history)


def _starts(tp: TranscriptionProblem, solver: PGDConfig) -> List[np.ndarray]:
    m = tp.problem.m
    starts = [np.zeros((tp.steps, m))]
    for s in range(1, solver.n_starts):
        rng = np.random.default_rng(solver.seed + s)
        starts.append(tp.problem.control_set.sample(rng, tp.steps))
    return starts


def transcribe_and_solve(tp: TranscriptionProblem, solver: Optional[PGDConfig] = None) -> TrajectorySolution:
    """Best of n_starts projected-gradient runs (start 0 is u = 0, the rest are seeded uniform draws)."""
    solver = solver or PGDConfig(steps=tp.steps)
    starts = _starts(tp, solver)
    with ThreadPoolExecutor(max_workers=solver.threads) as pool:
        results = list(pool.map(lambda u: _solve_from(tp, u, solver), starts))
    best = min(range(len(results)), key=lambda i: (results[i].objective, i))
    solution = results[best]
    for i, r in enumerate(results):
        if not r.converged:
            logger.warning("--- Transcription start %d did not converge in %d iterations ---", i, r.iterations)
    if not solution.converged:
        solution.warnings.append(f"best start stopped after {solution.iterations} iterations without converging")
        if solver.strict:
            raise NotConverged("projected gradient did not reach the tolerance",
                               context={"solution": solution, "iterations": solution.iterations})
    logger.info("--- Transcription x0=%s: objective %.6g (start %d) ---", np.array2string(tp.x0, precision=3),
                solution.objective, best)
    return solution
