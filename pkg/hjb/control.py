"""
Hamiltonian and pointwise argmin solvers.

All functions are batched over leading axes: t broadcasts, x and p are (..., d) and
the returned controls are (..., m).
"""

from typing import Optional

import numpy as np

from . import config
from .errors import DegenerateGradient, NoMinimizer, NonDiagonalR
from .models import AngleSet, ArgminConfig, BoxSet, IntervalSet
from .problem import ControlProblem

# Caps the (points x scan-grid) objective block evaluated at once.
_SCAN_BLOCK = 1 << 22


def vehicle_steering_law(grad: np.ndarray, tol_grad: float = config.TOL_GRAD,
                         fallback: float = config.FALLBACK_ANGLE, strict: bool = False) -> np.ndarray:
    """Angle minimizing cos(u) g1 + sin(u) g2, i.e. the direction of -grad.

    Gradients shorter than tol_grad get the fallback angle, or raise DegenerateGradient in strict mode.
    """
    grad = np.asarray(grad, dtype=float)
    angle = np.arctan2(-grad[..., 1], -grad[..., 0])
    degenerate = np.linalg.norm(grad, axis=-1) < tol_grad
    if np.any(degenerate):
        if strict:
            raise DegenerateGradient(f"gradient norm below {tol_grad}",
                                     context={"count": int(np.sum(degenerate))})
        angle = np.where(degenerate, fallback, angle)
    return angle


def lqr_closed_form_argmin(B: np.ndarray, R_diag: np.ndarray, p: np.ndarray, box) -> np.ndarray:
    """Minimizer of p.Bu + u^T R u over a box for diagonal R: clamp(-(B^T p)_i / (2 R_ii))."""
    R = np.asarray(R_diag, dtype=float)
    if R.ndim == 2:
        if np.any(R - np.diag(np.diag(R)) != 0.0):
            raise NonDiagonalR("closed-form argmin needs a diagonal control weight R")
        R = np.diag(R)
    if np.any(R <= 0.0):
        raise NoMinimizer("control weight R must be strictly positive")
    if not isinstance(box, (BoxSet, IntervalSet)):
        raise NoMinimizer("closed-form LQR argmin needs a box control set")
    lo, hi = box.bounds()
    p = np.asarray(p, dtype=float)
    unconstrained = -(p @ np.asarray(B, dtype=float)) / (2.0 * R)
    return np.clip(unconstrained, lo, hi)


def _objective(problem: ControlProblem, t, x, p, u) -> np.ndarray:
    return np.sum(p * problem.dynamics(t, x, u), axis=-1) + problem.running_cost(t, x, u)


def _grid_scan(problem: ControlProblem, t, x, p, solver: ArgminConfig) -> np.ndarray:
    grid = problem.control_set.scan_grid(solver.resolution(problem.m))
    n_grid = grid.shape[0]
    batch_shape = p.shape[:-1]
    t_flat = np.broadcast_to(np.asarray(t, dtype=float), batch_shape).reshape(-1)
    x_flat = np.broadcast_to(x, batch_shape + (problem.d,)).reshape(-1, problem.d)
    p_flat = p.reshape(-1, problem.d)
    out = np.empty((p_flat.shape[0], problem.m))
    block = max(1, _SCAN_BLOCK // n_grid)
    for s in range(0, p_flat.shape[0], block):
        e = min(s + block, p_flat.shape[0])
        tt = np.repeat(t_flat[s:e], n_grid)
        xx = np.repeat(x_flat[s:e], n_grid, axis=0)
        pp = np.repeat(p_flat[s:e], n_grid, axis=0)
        uu = np.tile(grid, (e - s, 1))
        values = _objective(problem, tt, xx, pp, uu).reshape(e - s, n_grid)
        # first index of the minimum = smallest lexicographic control on the scan grid
        out[s:e] = grid[np.argmin(values, axis=1)]
    return out.reshape(batch_shape + (problem.m,))


def _closed_form(problem: ControlProblem, p, solver: ArgminConfig) -> np.ndarray:
    if problem.steering:
        return vehicle_steering_law(p, solver.tol_grad, solver.fallback_angle)[..., None]
    if problem.input_matrix is not None and problem.control_weight is not None:
        return lqr_closed_form_argmin(problem.input_matrix, problem.control_weight, p, problem.control_set)
    raise NoMinimizer(f"problem '{problem.name}' has no closed-form minimizer",
                      context={"problem": problem.name, "method": solver.method})


def argmin_control(problem: ControlProblem, t, x, p, solver: Optional[ArgminConfig] = None) -> np.ndarray:
    """Pointwise minimizer of p.f(t,x,u) + L(t,x,u) over U."""
    solver = solver or ArgminConfig()
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    if solver.method == "grid_scan" or (solver.method == "auto" and not problem.has_closed_form):
        u = _grid_scan(problem, t, x, p, solver)
    else:
        u = _closed_form(problem, p, solver)
    return problem.control_set.project(u)


def hamiltonian(problem: ControlProblem, t, x, p, solver: Optional[ArgminConfig] = None) -> np.ndarray:
    """H(t,x,p) = inf_u p.f + L, evaluated at the minimizer found by argmin_control."""
    u = argmin_control(problem, t, x, p, solver)
    return _objective(problem, t, np.asarray(x, dtype=float), np.asarray(p, dtype=float), u)
