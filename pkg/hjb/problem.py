"""
Optimal control problem and terminal condition containers.

Every callable here is batched: states are arrays of shape (..., d), controls (..., m)
and times broadcast against the leading axes.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional

import numpy as np
from scipy.interpolate import NearestNDInterpolator
from scipy.stats import qmc

from . import config
from .errors import ConfigError, SensorMismatch
from .models import AngleSet, BoxSet, IntervalSet

logger = logging.getLogger(__name__)

Dynamics = Callable[[Any, np.ndarray, np.ndarray], np.ndarray]
RunningCost = Callable[[Any, np.ndarray, np.ndarray], np.ndarray]


def sobol_points(lo: np.ndarray, hi: np.ndarray, n: int, seed: int = 0) -> np.ndarray:
    """First n points of a scrambled Sobol sequence mapped onto the box [lo, hi]."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    sampler = qmc.Sobol(d=lo.shape[0], scramble=True, seed=seed)
    unit = sampler.random_base2(max(0, math.ceil(math.log2(max(n, 1)))))[:n]
    return qmc.scale(unit, lo, hi) if lo.shape[0] > 0 else unit


def central_jacobian(fn: Callable[[np.ndarray], np.ndarray], z: np.ndarray, step: float = config.FD_STEP) -> np.ndarray:
    """Central-difference Jacobian of a batched map along the last axis of z.

    Output shape is fn(z).shape + (z.shape[-1],).
    """
    z = np.asarray(z, dtype=float)
    cols = []
    for i in range(z.shape[-1]):
        e = np.zeros(z.shape[-1])
        e[i] = step
        cols.append((np.asarray(fn(z + e)) - np.asarray(fn(z - e))) / (2.0 * step))
    return np.stack(cols, axis=-1)


@dataclass(frozen=True)
class ControlProblem:
    """The tuple (f, L, U, T, d, m) of a finite-horizon control problem on a working box."""
    name: str
    d: int
    m: int
    T: float
    dynamics: Dynamics
    running_cost: RunningCost
    control_set: Any
    box_lo: np.ndarray
    box_hi: np.ndarray
    f_sup_norm: Optional[float] = None
    # closed-form argmin data: f = a(t,x) + B u and L = l(t,x) + u^T diag(R) u
    input_matrix: Optional[np.ndarray] = None
    control_weight: Optional[np.ndarray] = None
    steering: bool = False
    dynamics_jac_x: Optional[Callable] = None
    dynamics_jac_u: Optional[Callable] = None
    cost_grad_x: Optional[Callable] = None
    cost_grad_u: Optional[Callable] = None
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not isinstance(self.control_set, (BoxSet, IntervalSet, AngleSet)):
            raise ConfigError("control_set must be a BoxSet, IntervalSet or AngleSet",
                              context={"problem": self.name})
        if self.control_set.dim != self.m:
            raise ConfigError(f"control set has dimension {self.control_set.dim}, expected m={self.m}",
                              context={"problem": self.name})
        if self.T <= 0:
            raise ConfigError("horizon T must be positive", context={"problem": self.name})
        object.__setattr__(self, "box_lo", np.asarray(self.box_lo, dtype=float))
        object.__setattr__(self, "box_hi", np.asarray(self.box_hi, dtype=float))
        if self.box_lo.shape != (self.d,) or self.box_hi.shape != (self.d,):
            raise ConfigError("working box corners must have length d", context={"problem": self.name})

        if self.f_sup_norm is None:
            object.__setattr__(self, "f_sup_norm", self.estimate_f_sup_norm())
            logger.debug("--- %s: estimated |f|_inf = %.6g ---", self.name, self.f_sup_norm)
        self._check_sampled_invariants()

    def _joint_samples(self, unit: np.ndarray):
        t = unit[:, 0] * self.T
        x = self.box_lo + unit[:, 1:1 + self.d] * (self.box_hi - self.box_lo)
        u_lo, u_hi = self.control_set.bounds()
        u = u_lo + unit[:, 1 + self.d:] * (u_hi - u_lo)
        return t, x, u

    def estimate_f_sup_norm(self) -> float:
        """Sobol estimate of sup |f| over [0,T] x box x U, inflated by the safety factor."""
        unit = qmc.Sobol(d=1 + self.d + self.m, scramble=True, seed=0).random_base2(config.F_SUP_SOBOL_LOG2)
        t, x, u = self._joint_samples(unit)
        speeds = np.linalg.norm(self.dynamics(t, x, u), axis=-1)
        return float(config.F_SUP_SAFETY * speeds.max())

    def _check_sampled_invariants(self):
        rng = np.random.default_rng(12345)
        t, x, u = self._joint_samples(rng.random((config.F_SUP_CHECK_SAMPLES, 1 + self.d + self.m)))
        f1 = self.dynamics(t, x, u)
        f2 = self.dynamics(t, x, u)
        l1 = self.running_cost(t, x, u)
        l2 = self.running_cost(t, x, u)
        if not (np.array_equal(f1, f2) and np.array_equal(l1, l2)):
            raise ConfigError("dynamics and running cost must be deterministic", context={"problem": self.name})
        worst = float(np.linalg.norm(f1, axis=-1).max())
        if worst > self.f_sup_norm * (1.0 + 1e-12):
            raise ConfigError(f"f_sup_norm={self.f_sup_norm} is below a sampled |f|={worst}",
                              context={"problem": self.name})

    # --- derivatives used by the transcription adjoint ---

    def f_x(self, t, x, u) -> np.ndarray:
        if self.dynamics_jac_x is not None:
            return self.dynamics_jac_x(t, x, u)
        return central_jacobian(lambda z: self.dynamics(t, z, u), x)

    def f_u(self, t, x, u) -> np.ndarray:
        if self.dynamics_jac_u is not None:
            return self.dynamics_jac_u(t, x, u)
        return central_jacobian(lambda z: self.dynamics(t, x, z), u)

    def L_x(self, t, x, u) -> np.ndarray:
        if self.cost_grad_x is not None:
            return self.cost_grad_x(t, x, u)
        return central_jacobian(lambda z: self.running_cost(t, z, u), x)

    def L_u(self, t, x, u) -> np.ndarray:
        if self.cost_grad_u is not None:
            return self.cost_grad_u(t, x, u)
        return central_jacobian(lambda z: self.running_cost(t, x, z), u)

    @property
    def has_closed_form(self) -> bool:
        return self.steering or (self.input_matrix is not None and self.control_weight is not None)

    def with_horizon(self, T: float) -> "ControlProblem":
        """Same problem on a different horizon; keeps the supplied |f|_inf."""
        kwargs = {f: getattr(self, f) for f in self.__dataclass_fields__}
        kwargs["T"] = float(T)
        return ControlProblem(**kwargs)

    def sample_states(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.uniform(self.box_lo, self.box_hi, size=(n, self.d))


@dataclass(frozen=True)
class TerminalCondition:
    """A terminal function g together with its branch-net encoding on fixed sensor points."""
    evaluator: Callable[[np.ndarray], np.ndarray]
    sensor_points: np.ndarray
    sensor_values: Optional[np.ndarray] = None
    gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None
    label: str = "g"
    params: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        points = np.atleast_2d(np.asarray(self.sensor_points, dtype=float))
        object.__setattr__(self, "sensor_points", points)
        sampled = np.asarray(self.evaluator(points), dtype=float)
        if self.sensor_values is None:
            object.__setattr__(self, "sensor_values", sampled)
            return
        values = np.asarray(self.sensor_values, dtype=float)
        if values.shape != (points.shape[0],) or not np.array_equal(values, sampled):
            raise SensorMismatch("sensor values disagree with the evaluator at the sensor points",
                                 context={"label": self.label})
        object.__setattr__(self, "sensor_values", values)

    @property
    def k(self) -> int:
        return self.sensor_points.shape[0]

    @property
    def d(self) -> int:
        return self.sensor_points.shape[1]

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.evaluator(np.asarray(x, dtype=float))

    def grad(self, x: np.ndarray) -> np.ndarray:
        if self.gradient is not None:
            return self.gradient(np.asarray(x, dtype=float))
        return central_jacobian(self.evaluator, x)

    def resampled(self, sensor_points: np.ndarray) -> "TerminalCondition":
        """The same function encoded on another sensor layout."""
        return TerminalCondition(self.evaluator, sensor_points, gradient=self.gradient,
                                 label=self.label, params=dict(self.params))

    # --- constructors ---

    @classmethod
    def quadratic(cls, a: float, b: float, sensor_points: np.ndarray) -> "TerminalCondition":
        """g(x) = a + b |x|^2."""
        a, b = float(a), float(b)
        return cls(lambda x: a + b * np.sum(x * x, axis=-1), sensor_points,
                   gradient=lambda x: 2.0 * b * x, label=f"{a:g} + {b:g}*|x|^2",
                   params={"kind": "quadratic", "a": a, "b": b})

    @classmethod
    def norm(cls, sensor_points: np.ndarray) -> "TerminalCondition":
        """g(x) = |x|; the gradient at the origin is taken as 0."""
        def grad(x):
            r = np.linalg.norm(x, axis=-1, keepdims=True)
            return np.divide(x, r, out=np.zeros_like(x), where=r > 0)
        return cls(lambda x: np.linalg.norm(x, axis=-1), sensor_points, gradient=grad,
                   label="|x|", params={"kind": "norm"})

    @classmethod
    def squared_norm(cls, sensor_points: np.ndarray) -> "TerminalCondition":
        tc = cls.quadratic(0.0, 1.0, sensor_points)
        return TerminalCondition(tc.evaluator, tc.sensor_points, gradient=tc.gradient,
                                 label="|x|^2", params={"kind": "squared_norm"})

    @classmethod
    def from_sensor_values(cls, sensor_points: np.ndarray, values: np.ndarray,
                           label: str = "sensor-file") -> "TerminalCondition":
        """Build g from its sensor samples alone; off-sensor queries take the nearest sensor value."""
        points = np.atleast_2d(np.asarray(sensor_points, dtype=float))
        values = np.asarray(values, dtype=float).ravel()
        if values.shape[0] != points.shape[0]:
            raise SensorMismatch(f"{values.shape[0]} sensor values for {points.shape[0]} sensor points",
                                 context={"label": label})
        interp = NearestNDInterpolator(points, values)

        def evaluator(x):
            x = np.asarray(x, dtype=float)
            flat = interp(x.reshape(-1, points.shape[1]))
            return flat.reshape(x.shape[:-1])

        return cls(evaluator, points, sensor_values=values, label=label, params={"kind": "sensor"})
