"""
Operator network G[g](t, x) = <branch(g(sensors)), trunk(t, x)> and its physics-informed losses.

The trunk input is laid out as (t, x_0, ..., x_{d-1}), so time is input coordinate 0.
Spatial derivatives of the learned value are always taken with the central stencils of
hjb.calculus; only the time derivative goes through the network (dual numbers).
"""

import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from hjb.calculus import laplace_from_values, nabla_from_values, stencil_points
from hjb.errors import EmptyCollocation, SensorMismatch, ShapeMismatch
from hjb.models import NetworkConfig
from hjb.problem import ControlProblem, TerminalCondition, sobol_points
from .mlp import Mlp, ParamGrad, backward_dual_params, backward_params, forward, forward_dual_t, init_params

logger = logging.getLogger(__name__)

T_INDEX = 0


@dataclass(frozen=True)
class OperatorNetwork:
    branch: Mlp
    trunk: Mlp
    sensor_points: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "sensor_points", np.atleast_2d(np.asarray(self.sensor_points, dtype=float)))
        if self.branch.n_out != self.trunk.n_out:
            raise ShapeMismatch(f"branch width {self.branch.n_out} != trunk width {self.trunk.n_out}")
        if self.branch.n_in != self.sensor_points.shape[0]:
            raise ShapeMismatch(f"branch expects {self.branch.n_in} sensors, layout has {self.sensor_points.shape[0]}")
        if self.trunk.n_in != 1 + self.sensor_points.shape[1]:
            raise ShapeMismatch("trunk input must be (t, x)")

    @property
    def latent_width(self) -> int:
        return self.branch.n_out

    @property
    def d(self) -> int:
        return self.sensor_points.shape[1]

    def parameters(self) -> List[np.ndarray]:
        return self.branch.parameters() + self.trunk.parameters()

    def with_parameters(self, params: Sequence[np.ndarray]) -> "OperatorNetwork":
        n_branch = len(self.branch.parameters())
        return OperatorNetwork(self.branch.with_parameters(params[:n_branch]),
                               self.trunk.with_parameters(params[n_branch:]), self.sensor_points)

    def field(self, g: TerminalCondition) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
        """V(t, x) for a fixed terminal function, with the branch output computed once."""
        b = branch_outputs(self, [g])[0]
        return lambda t, x: trunk_outputs(self, t, x) @ b


def create_operator_network(problem: ControlProblem, cfg: NetworkConfig,
                            sensor_points: Optional[np.ndarray] = None) -> OperatorNetwork:
    """Glorot-initialized branch [k, hidden.., p] and trunk [1+d, hidden.., p]."""
    if sensor_points is None:
        sensor_points = sobol_points(problem.box_lo, problem.box_hi, cfg.sensors, seed=cfg.seed)
    k = np.atleast_2d(sensor_points).shape[0]
    branch = init_params([k, *cfg.branch_hidden, cfg.latent_width], cfg.activation, seed=cfg.seed)
    trunk = init_params([1 + problem.d, *cfg.trunk_hidden, cfg.latent_width], cfg.activation, seed=cfg.seed + 1)
    return OperatorNetwork(branch, trunk, sensor_points)


def check_sensors(net: OperatorNetwork, g: TerminalCondition) -> None:
    if g.sensor_points.shape != net.sensor_points.shape or not np.array_equal(g.sensor_points, net.sensor_points):
        raise SensorMismatch("terminal condition is not sampled at the operator's sensor points",
                             context={"label": g.label, "expected_k": int(net.sensor_points.shape[0]),
                                      "got_k": int(g.sensor_points.shape[0])})


def branch_outputs(net: OperatorNetwork, g_set: Sequence[TerminalCondition]) -> np.ndarray:
    """(K, p) branch embeddings of the terminal functions."""
    for g in g_set:
        check_sensors(net, g)
    return forward(net.branch, np.stack([g.sensor_values for g in g_set]))


def trunk_inputs(t, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    t = np.broadcast_to(np.asarray(t, dtype=float), x.shape[:-1])
    return np.concatenate([t[..., None], x], axis=-1)


def trunk_outputs(net: OperatorNetwork, t, x: np.ndarray) -> np.ndarray:
    y = trunk_inputs(t, x)
    out = forward(net.trunk, y.reshape(-1, y.shape[-1]))
    return out.reshape(y.shape[:-1] + (net.latent_width,))


def operator_eval(net: OperatorNetwork, g: TerminalCondition, t, x: np.ndarray) -> np.ndarray:
    """Inner product of branch(g sensor values) and trunk((t, x)); batched over (t, x)."""
    b = branch_outputs(net, [g])[0]
    return trunk_outputs(net, t, x) @ b


def operator_eval_dt(net: OperatorNetwork, g: TerminalCondition, t, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Value and its time derivative, sum_i B_i * dT_i/dt."""
    b = branch_outputs(net, [g])[0]
    y = trunk_inputs(t, x)
    out, dout = forward_dual_t(net.trunk, y.reshape(-1, y.shape[-1]), T_INDEX)
    shape = y.shape[:-1]
    return (out @ b).reshape(shape), (dout @ b).reshape(shape)


def scheme_residual(problem: ControlProblem, value: Callable, value_dt: Callable, controls: np.ndarray,
                    t: np.ndarray, x: np.ndarray, h: float, N: float) -> np.ndarray:
    """
    dV/dt + L + grad_h V . f + N h lap_h V for an arbitrary batched field V(t, x).

    `controls` are the policy values at (t, x); t is (n,), x is (n, d).
    """
    t = np.asarray(t, dtype=float)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n, d = x.shape
    stencil = stencil_points(x, h)
    t_st = np.repeat(t, 2 * d).reshape(n, 2 * d)
    values = np.asarray(value(t_st, stencil), dtype=float).reshape(n, 2 * d)
    center = np.asarray(value(t, x), dtype=float)
    f = problem.dynamics(t, x, controls)
    L = problem.running_cost(t, x, controls)
    grad = nabla_from_values(values, h)
    lap = laplace_from_values(center, values, h)
    return value_dt(t, x) + L + np.sum(grad * f, axis=-1) + N * h * lap


def pde_residual(net: OperatorNetwork, g: TerminalCondition, policy, t, x, h: float, N: float,
                 problem: ControlProblem) -> np.ndarray:
    """Scheme residual of the operator value for terminal function g under `policy`."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    x = np.atleast_2d(np.asarray(x, dtype=float))
    controls = policy.evaluate(t, x, g)
    return scheme_residual(problem, lambda tt, xx: operator_eval(net, g, tt, xx),
                           lambda tt, xx: operator_eval_dt(net, g, tt, xx)[1], controls, t, x, h, N)


@dataclass
class CollocationSet:
    interior_t: np.ndarray
    interior_x: np.ndarray
    terminal_x: np.ndarray
    T: float

    @classmethod
    def sample(cls, problem: ControlProblem, n_interior: int, n_terminal: int,
               rng: np.random.Generator, T: Optional[float] = None) -> "CollocationSet":
        """Uniform interior points over [0, T] x box and terminal points over the box."""
        T = problem.T if T is None else T
        return cls(rng.uniform(0.0, T, size=n_interior), problem.sample_states(rng, n_interior),
                   problem.sample_states(rng, n_terminal), T)

    @property
    def n_interior(self) -> int:
        return self.interior_x.shape[0]

    @property
    def n_terminal(self) -> int:
        return self.terminal_x.shape[0]


@dataclass
class LossBreakdown:
    L1: float
    L2: float
    residuals: np.ndarray        # (n_interior, K)
    terminal_errors: np.ndarray  # (n_terminal, K)


@dataclass
class _Forward:
    B: np.ndarray
    Tc: np.ndarray
    Tc_dot: np.ndarray
    Ts: np.ndarray
    Tterm: np.ndarray
    flows: np.ndarray            # (n, d, K)
    residuals: np.ndarray
    terminal_errors: np.ndarray


def _forward_losses(net: OperatorNetwork, g_set: Sequence[TerminalCondition], policy, colloc: CollocationSet,
                    h: float, N: float, problem: ControlProblem) -> _Forward:
    if colloc.n_interior == 0 or colloc.n_terminal == 0 or len(g_set) == 0:
        raise EmptyCollocation("loss needs interior points, terminal points and at least one terminal function",
                               context={"n_interior": colloc.n_interior, "n_terminal": colloc.n_terminal,
                                        "n_terminal_functions": len(g_set)})
    t, x = colloc.interior_t, colloc.interior_x
    n, d = x.shape
    K = len(g_set)
    B = branch_outputs(net, g_set)
    Tc, Tc_dot = forward_dual_t(net.trunk, trunk_inputs(t, x), T_INDEX)
    stencil = stencil_points(x, h).reshape(n * 2 * d, d)
    Ts = forward(net.trunk, trunk_inputs(np.repeat(t, 2 * d), stencil))
    Tterm = forward(net.trunk, trunk_inputs(np.full(colloc.n_terminal, colloc.T), colloc.terminal_x))

    Vc = Tc @ B.T
    Vt = Tc_dot @ B.T
    Vs = (Ts @ B.T).reshape(n, 2 * d, K)
    grad = (Vs[:, 0::2, :] - Vs[:, 1::2, :]) / (2.0 * h)
    lap = np.sum(Vs[:, 0::2, :] - 2.0 * Vc[:, None, :] + Vs[:, 1::2, :], axis=1) / (h * h)

    flows = np.empty((n, d, K))
    residuals = np.empty((n, K))
    for k, g in enumerate(g_set):
        u = policy.evaluate(t, x, g)
        flows[:, :, k] = problem.dynamics(t, x, u)
        L = problem.running_cost(t, x, u)
        residuals[:, k] = Vt[:, k] + L + np.sum(grad[:, :, k] * flows[:, :, k], axis=-1) + N * h * lap[:, k]

    targets = np.stack([g(colloc.terminal_x) for g in g_set], axis=-1)
    terminal_errors = Tterm @ B.T - targets
    return _Forward(B, Tc, Tc_dot, Ts, Tterm, flows, residuals, terminal_errors)


def loss_terms(net: OperatorNetwork, g_batch: Sequence[TerminalCondition], policy, colloc: CollocationSet,
               h: float, N: float, problem: ControlProblem) -> LossBreakdown:
    """L1 = mean squared scheme residual, L2 = mean squared terminal mismatch, over points and g."""
    fw = _forward_losses(net, g_batch, policy, colloc, h, N, problem)
    return LossBreakdown(float(np.mean(fw.residuals ** 2)), float(np.mean(fw.terminal_errors ** 2)),
                         fw.residuals, fw.terminal_errors)


def loss_and_gradient(net: OperatorNetwork, g_batch: Sequence[TerminalCondition], policy, colloc: CollocationSet,
                      h: float, N: float, problem: ControlProblem, alpha1: float, alpha2: float
                      ) -> Tuple[float, LossBreakdown, List[np.ndarray]]:
    """alpha1 L1 + alpha2 L2 and its exact gradient, ordered like net.parameters()."""
    fw = _forward_losses(net, g_batch, policy, colloc, h, N, problem)
    r, e = fw.residuals, fw.terminal_errors
    n, d, K = fw.flows.shape
    L1 = float(np.mean(r ** 2))
    L2 = float(np.mean(e ** 2))

    # the residual is linear in the stencil values: r = dV/dt + L + c0 V0 + sum_i (c+_i V+i + c-_i V-i)
    rbar = alpha1 * 2.0 * r / r.size
    c_plus = fw.flows / (2.0 * h) + N / h
    c_minus = -fw.flows / (2.0 * h) + N / h
    c0 = -2.0 * d * N / h
    stencil_coef = np.empty((n, 2 * d, K))
    stencil_coef[:, 0::2, :] = rbar[:, None, :] * c_plus
    stencil_coef[:, 1::2, :] = rbar[:, None, :] * c_minus
    stencil_coef = stencil_coef.reshape(n * 2 * d, K)
    center_coef = rbar * c0
    term_coef = alpha2 * 2.0 * e / e.size

    t, x = colloc.interior_t, colloc.interior_x
    trunk_grad = backward_dual_params(net.trunk, trunk_inputs(t, x), T_INDEX, center_coef @ fw.B, rbar @ fw.B)
    stencil = stencil_points(x, h).reshape(n * 2 * d, d)
    trunk_grad.accumulate(backward_params(net.trunk, trunk_inputs(np.repeat(t, 2 * d), stencil), stencil_coef @ fw.B))
    term_inputs = trunk_inputs(np.full(colloc.n_terminal, colloc.T), colloc.terminal_x)
    trunk_grad.accumulate(backward_params(net.trunk, term_inputs, term_coef @ fw.B))

    B_bar = center_coef.T @ fw.Tc + rbar.T @ fw.Tc_dot + stencil_coef.T @ fw.Ts + term_coef.T @ fw.Tterm
    sensors = np.stack([g.sensor_values for g in g_batch])
    branch_grad: ParamGrad = backward_params(net.branch, sensors, B_bar)

    total = alpha1 * L1 + alpha2 * L2
    return total, LossBreakdown(L1, L2, r, e), branch_grad.as_list() + trunk_grad.as_list()


def estimate_residual_sups(net: OperatorNetwork, g_set: Sequence[TerminalCondition], policy, problem: ControlProblem,
                           h: float, N: float, n_probes: int, rng: np.random.Generator,
                           T: Optional[float] = None, chunk: int = 2048) -> Tuple[float, float]:
    """Estimated sup |residual| and sup |V(T,.) - g| on fresh uniform probes, maximized over g."""
    eps1, eps2 = 0.0, 0.0
    probes = CollocationSet.sample(problem, n_probes, n_probes, rng, T)
    for s in range(0, n_probes, chunk):
        e = min(s + chunk, n_probes)
        part = CollocationSet(probes.interior_t[s:e], probes.interior_x[s:e], probes.terminal_x[s:e], probes.T)
        fw = _forward_losses(net, g_set, policy, part, h, N, problem)
        eps1 = max(eps1, float(np.max(np.abs(fw.residuals))))
        eps2 = max(eps2, float(np.max(np.abs(fw.terminal_errors))))
    return eps1, eps2
