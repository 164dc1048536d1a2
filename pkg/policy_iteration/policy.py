"""
Value handles and the policies they induce.

A value handle exposes value(t, x, g) and a stencil gradient; operator handles depend on
the terminal function g, grid and analytic handles ignore it.
"""

from typing import Callable, Optional, Union

import numpy as np

from hjb.calculus import nabla_from_values, stencil_points
from hjb.control import argmin_control
from hjb.models import ArgminConfig
from hjb.problem import ControlProblem, TerminalCondition
from network.deeponet import OperatorNetwork, operator_eval


class _ValueHandle:
    def value(self, t, x: np.ndarray, g: Optional[TerminalCondition] = None) -> np.ndarray:
        raise NotImplementedError

    def gradient(self, t, x: np.ndarray, h: float, g: Optional[TerminalCondition] = None) -> np.ndarray:
        """Central-difference spatial gradient, one batched evaluation of all stencil points."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        n, d = x.shape
        t = np.broadcast_to(np.asarray(t, dtype=float), (n,))
        stencil = stencil_points(x, h)
        values = self.value(np.repeat(t, 2 * d).reshape(n, 2 * d), stencil, g)
        return nabla_from_values(np.asarray(values, dtype=float).reshape(n, 2 * d), h)


class OperatorValueHandle(_ValueHandle):
    def __init__(self, net: OperatorNetwork):
        self.net = net

    def value(self, t, x, g=None):
        if g is None:
            raise ValueError("operator value handles need the terminal function g")
        return operator_eval(self.net, g, t, x)


class GridValueHandle(_ValueHandle):
    def __init__(self, field):
        self.field = field

    def value(self, t, x, g=None):
        return self.field.interpolate(t, x)


class AnalyticValueHandle(_ValueHandle):
    def __init__(self, fn: Callable[[np.ndarray, np.ndarray], np.ndarray]):
        self.fn = fn

    def value(self, t, x, g=None):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(self.fn(np.asarray(t, dtype=float), x), x.shape[:-1])


ValueHandle = Union[OperatorValueHandle, GridValueHandle, AnalyticValueHandle]


class InitialPolicy:
    """u_0: a constant control (default 0) or a callable (t, x) -> u, projected into U."""
    def __init__(self, problem: ControlProblem, u0: Union[float, np.ndarray, Callable, None] = None):
        self.problem = problem
        self.u0 = np.zeros(problem.m) if u0 is None else u0

    def evaluate(self, t, x, g=None) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if callable(self.u0):
            u = np.asarray(self.u0(t, x), dtype=float)
        else:
            u = np.broadcast_to(np.asarray(self.u0, dtype=float), x.shape[:-1] + (self.problem.m,))
        return self.problem.control_set.project(u)


class InducedPolicy:
    """u_{n+1}(t, x) = argmin_u grad_h V_n(t, x) . f + L, computed per query."""
    def __init__(self, value: ValueHandle, problem: ControlProblem, h: float, solver: Optional[ArgminConfig] = None):
        self.value = value
        self.problem = problem
        self.h = h
        self.solver = solver or ArgminConfig()

    def evaluate(self, t, x, g=None) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        batch = x.shape[:-1]
        flat_x = x.reshape(-1, self.problem.d)
        flat_t = np.broadcast_to(np.asarray(t, dtype=float), batch).reshape(-1)
        p = self.value.gradient(flat_t, flat_x, self.h, g)
        u = argmin_control(self.problem, flat_t, flat_x, p, self.solver)
        return u.reshape(batch + (self.problem.m,))


PolicyHandle = Union[InitialPolicy, InducedPolicy]


def policy_update(v_handle: ValueHandle, problem: ControlProblem, h: float,
                  solver: Optional[ArgminConfig] = None) -> InducedPolicy:
    """The policy induced by v_handle; lazy, nothing is precomputed."""
    return InducedPolicy(v_handle, problem, h, solver)
