"""
Dense-grid reference solver for the viscous semi-discrete scheme, d <= 2.

Backward explicit Euler in time:
    V(t - dt, x) = V(t, x) + dt * [L + grad_h V . f + N h lap_h V]
with ghost nodes outside the box taken by linear extrapolation (2 V_0 - V_1).
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy.interpolate import RegularGridInterpolator

from hjb import config
from hjb.errors import ConfigError, NonFiniteValue, UnstableSpec
from hjb.models import ArgminConfig, GridSpec
from hjb.problem import ControlProblem, TerminalCondition
from policy_iteration.policy import GridValueHandle, InitialPolicy, policy_update

logger = logging.getLogger(__name__)


@dataclass
class GridField:
    """Values on every node of every time slice, shape (K + 1, n_0, ..., n_{d-1})."""
    spec: GridSpec
    values: np.ndarray
    dt: float
    _interp: Optional[RegularGridInterpolator] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        expected = (self.n_slices,) + self.spec.node_counts()
        if self.values.shape != expected:
            raise ConfigError(f"grid values have shape {self.values.shape}, expected {expected}")

    @property
    def n_slices(self) -> int:
        return int(round(self.spec.T / self.dt)) + 1

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.spec.T, self.n_slices)

    def nodes(self) -> np.ndarray:
        mesh = np.meshgrid(*self.spec.axes(), indexing="ij")
        return np.stack(mesh, axis=-1)

    def slice_at(self, t: float) -> np.ndarray:
        k = int(round(t / self.dt))
        return self.values[k]

    def interpolate(self, t, x: np.ndarray) -> np.ndarray:
        """Multilinear interpolation in (t, x); linear extrapolation outside the box."""
        if self._interp is None:
            self._interp = RegularGridInterpolator((self.times, *self.spec.axes()), self.values,
                                                   method="linear", bounds_error=False, fill_value=None)
        x = np.asarray(x, dtype=float)
        t = np.broadcast_to(np.asarray(t, dtype=float), x.shape[:-1])
        query = np.concatenate([t[..., None], x], axis=-1)
        return self._interp(query.reshape(-1, query.shape[-1])).reshape(x.shape[:-1])

    def to_frame(self) -> pd.DataFrame:
        """Long format: t, x0..x{d-1}, value."""
        nodes = self.nodes().reshape(-1, self.spec.d)
        frames = []
        for k, t in enumerate(self.times):
            data = {"t": np.full(nodes.shape[0], t)}
            for i in range(self.spec.d):
                data[f"x{i}"] = nodes[:, i]
            data["value"] = self.values[k].ravel()
            frames.append(pd.DataFrame(data))
        return pd.concat(frames, ignore_index=True)

    def save_slab(self, path: str) -> None:
        np.savez(path, format_version=np.asarray(config.CHECKPOINT_FORMAT_VERSION),
                 dims=np.asarray(self.spec.node_counts()), lo=np.asarray(self.spec.lo), hi=np.asarray(self.spec.hi),
                 h=np.asarray(self.spec.h), dt=np.asarray(self.dt), T=np.asarray(self.spec.T), values=self.values)

    @classmethod
    def load_slab(cls, path: str) -> "GridField":
        with np.load(path) as data:
            spec = GridSpec(lo=data["lo"].tolist(), hi=data["hi"].tolist(), h=float(data["h"]),
                            T=float(data["T"]), dt=float(data["dt"]))
            return cls(spec, np.array(data["values"]), float(data["dt"]))


def _neighbours(V: np.ndarray, axis: int):
    """Values at +h and -h along an axis, ghosts by linear extrapolation."""
    lo_ghost = 2.0 * np.take(V, [0], axis=axis) - np.take(V, [1], axis=axis)
    hi_ghost = 2.0 * np.take(V, [-1], axis=axis) - np.take(V, [-2], axis=axis)
    n = V.shape[axis]
    plus = np.concatenate([np.take(V, range(1, n), axis=axis), hi_ghost], axis=axis)
    minus = np.concatenate([lo_ghost, np.take(V, range(0, n - 1), axis=axis)], axis=axis)
    return plus, minus


def solve_linear_pde(problem: ControlProblem, policy, g: TerminalCondition, spec: GridSpec, N: float) -> GridField:
    """Solve the linear scheme for a frozen policy, backward from V(T) = g."""
    if spec.d != problem.d:
        raise ConfigError(f"grid has dimension {spec.d}, problem has {problem.d}")
    K, dt = spec.time_steps(problem.f_sup_norm, N)
    bound = spec.dt_bound(problem.f_sup_norm, N)
    if dt > bound * (1.0 + 1e-12):
        raise UnstableSpec(f"dt={dt:.6g} exceeds the stability bound {bound:.6g}",
                           context={"dt": dt, "bound": bound, "h": spec.h, "N": N})

    mesh = np.stack(np.meshgrid(*spec.axes(), indexing="ij"), axis=-1)
    h = spec.h
    values = np.empty((K + 1,) + mesh.shape[:-1])
    values[K] = g(mesh)
    times = np.linspace(0.0, spec.T, K + 1)
    for k in range(K, 0, -1):
        t = times[k]
        V = values[k]
        u = policy.evaluate(t, mesh, g)
        f = problem.dynamics(t, mesh, u)
        update = np.asarray(problem.running_cost(t, mesh, u), dtype=float).copy()
        for i in range(spec.d):
            plus, minus = _neighbours(V, i)
            update += f[..., i] * (plus - minus) / (2.0 * h) + N * (plus - 2.0 * V + minus) / h
        values[k - 1] = V + dt * update
        if not np.all(np.isfinite(values[k - 1])):
            raise NonFiniteValue(f"non-finite grid value at t={times[k - 1]:.6g}", context={"slice": k - 1})
    return GridField(spec, values, dt)


def grid_policy_iteration(problem: ControlProblem, g: TerminalCondition, spec: GridSpec, N: float, M: int,
                          solver: Optional[ArgminConfig] = None, u0=None) -> List[GridField]:
    """M rounds of (linear solve, policy update) from u_0 = 0; returns every solved field."""
    policy = InitialPolicy(problem, u0)
    fields: List[GridField] = []
    for n in range(M):
        logger.info("--- Grid policy iteration n=%d: solving linear scheme ---", n)
        fields.append(solve_linear_pde(problem, policy, g, spec, N))
        policy = policy_update(GridValueHandle(fields[-1]), problem, spec.h, solver)
    return fields


def hopf_lax_vehicle(t, x: np.ndarray, T: float) -> np.ndarray:
    """Exact value of the unit-speed vehicle with g = |x|: max(|x| - (T - t), 0)."""
    x = np.asarray(x, dtype=float)
    return np.maximum(np.linalg.norm(x, axis=-1) - (T - np.asarray(t, dtype=float)), 0.0)


@dataclass
class ConvergenceStudy:
    table: pd.DataFrame
    alpha: float


def sqrt_h_convergence_study(problem: ControlProblem, g: TerminalCondition, h_list: Sequence[float], N: float,
                             M: int, probes: np.ndarray, oracle: Optional[Callable] = None) -> ConvergenceStudy:
    """Max probe error of grid policy iteration at V(0, .) for each h, and the log-log slope."""
    if oracle is None:
        if not problem.steering:
            raise ConfigError("convergence study needs an oracle for non-vehicle problems")
        oracle = lambda t, x: hopf_lax_vehicle(t, x, problem.T)
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    reference = oracle(np.zeros(probes.shape[0]), probes)
    rows = []
    for h in h_list:
        spec = GridSpec(lo=problem.box_lo.tolist(), hi=problem.box_hi.tolist(), h=h, T=problem.T)
        V = grid_policy_iteration(problem, g, spec, N, M)[-1]
        err = np.abs(V.interpolate(0.0, probes) - reference)
        rows.append({"h": h, "max_error": float(err.max()), "mean_error": float(err.mean())})
        logger.info("--- Convergence study h=%g: max error %.4e ---", h, rows[-1]["max_error"])
    table = pd.DataFrame(rows)
    positive = table["max_error"] > 0
    if positive.sum() >= 2:
        alpha = float(np.polyfit(np.log(table.loc[positive, "h"]), np.log(table.loc[positive, "max_error"]), 1)[0])
    else:
        alpha = math.nan
    return ConvergenceStudy(table, alpha)
