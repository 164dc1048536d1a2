"""
Dense networks with hand-written differentiation.

Layers are stored as W of shape (out, in) and b of shape (out,), applied to row batches
as a @ W.T + b. The last layer is affine only.

Two differentiation modes are provided:
- forward-mode dual numbers seeded on one input coordinate (the time input of a trunk net);
- reverse mode with respect to the parameters, both for the plain forward pass and for
  the dual-number forward pass (the tangent channel takes part in the reverse sweep).
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from hjb import config
from hjb.errors import ShapeMismatch


def _tanh_d1(z):
    th = np.tanh(z)
    return 1.0 - th * th


def _tanh_d2(z):
    th = np.tanh(z)
    return -2.0 * th * (1.0 - th * th)


# name -> (sigma, sigma', sigma'')
ACTIVATIONS: Dict[str, Tuple[Callable, Callable, Callable]] = {
    "tanh": (np.tanh, _tanh_d1, _tanh_d2),
    "relu": (lambda z: np.maximum(z, 0.0), lambda z: (z > 0.0).astype(float), np.zeros_like),
    "sin": (np.sin, np.cos, lambda z: -np.sin(z)),
}


@dataclass(frozen=True)
class Mlp:
    widths: Tuple[int, ...]
    weights: Tuple[np.ndarray, ...]
    biases: Tuple[np.ndarray, ...]
    activation: str = config.DEFAULT_ACTIVATION
    seed: Optional[int] = None

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ShapeMismatch(f"unknown activation '{self.activation}'")
        if len(self.weights) != len(self.widths) - 1 or len(self.biases) != len(self.weights):
            raise ShapeMismatch("layer count does not match widths")
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.shape != (self.widths[i + 1], self.widths[i]) or b.shape != (self.widths[i + 1],):
                raise ShapeMismatch(f"layer {i} has shapes {W.shape}/{b.shape}, widths say "
                                    f"({self.widths[i + 1]}, {self.widths[i]})")

    @property
    def n_in(self) -> int:
        return self.widths[0]

    @property
    def n_out(self) -> int:
        return self.widths[-1]

    @property
    def parameter_count(self) -> int:
        return sum(w_in * w_out + w_out for w_in, w_out in zip(self.widths[:-1], self.widths[1:]))

    def parameters(self) -> List[np.ndarray]:
        """Parameters in layer order: [W0, b0, W1, b1, ...]."""
        out = []
        for W, b in zip(self.weights, self.biases):
            out.extend([W, b])
        return out

    def with_parameters(self, params: Sequence[np.ndarray]) -> "Mlp":
        params = list(params)
        return Mlp(self.widths, tuple(np.asarray(p, dtype=float) for p in params[0::2]),
                   tuple(np.asarray(p, dtype=float) for p in params[1::2]), self.activation, self.seed)

    def flat_parameters(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.parameters()])

    def with_flat_parameters(self, flat: np.ndarray) -> "Mlp":
        params, offset = [], 0
        for p in self.parameters():
            params.append(np.asarray(flat[offset:offset + p.size], dtype=float).reshape(p.shape))
            offset += p.size
        return self.with_parameters(params)


@dataclass
class ParamGrad:
    """Parameter-shaped gradient buffer."""
    weights: List[np.ndarray]
    biases: List[np.ndarray]
    count: int = 0

    @classmethod
    def zeros_like(cls, net: Mlp) -> "ParamGrad":
        return cls([np.zeros_like(W) for W in net.weights], [np.zeros_like(b) for b in net.biases])

    def accumulate(self, other: "ParamGrad", scale: float = 1.0) -> "ParamGrad":
        for i in range(len(self.weights)):
            self.weights[i] += scale * other.weights[i]
            self.biases[i] += scale * other.biases[i]
        self.count += 1
        return self

    def reset(self) -> None:
        for i in range(len(self.weights)):
            self.weights[i][...] = 0.0
            self.biases[i][...] = 0.0
        self.count = 0

    def as_list(self) -> List[np.ndarray]:
        out = []
        for W, b in zip(self.weights, self.biases):
            out.extend([W, b])
        return out

    def flat(self) -> np.ndarray:
        return np.concatenate([g.ravel() for g in self.as_list()])


def init_params(widths: Sequence[int], activation: str = config.DEFAULT_ACTIVATION, seed: int = 0) -> Mlp:
    """Glorot-uniform weights and zero biases, fully determined by the seed."""
    widths = tuple(int(w) for w in widths)
    if len(widths) < 2 or any(w < 1 for w in widths):
        raise ShapeMismatch(f"invalid layer widths {widths}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return Mlp(widths, tuple(weights), tuple(biases), activation, seed)


def _as_batch(net: Mlp, x: np.ndarray) -> Tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[-1] != net.n_in:
        raise ShapeMismatch(f"input width {x.shape[-1]} does not match network input width {net.n_in}")
    return x, single


def _forward_cache(net: Mlp, x: np.ndarray):
    sigma = ACTIVATIONS[net.activation][0]
    inputs, pre = [], []
    a = x
    last = len(net.weights) - 1
    for i, (W, b) in enumerate(zip(net.weights, net.biases)):
        inputs.append(a)
        z = a @ W.T + b
        pre.append(z)
        a = z if i == last else sigma(z)
    return a, inputs, pre


def forward(net: Mlp, x: np.ndarray) -> np.ndarray:
    """Affine-activation composition; input (n_in,) or (n, n_in)."""
    x, single = _as_batch(net, x)
    out = _forward_cache(net, x)[0]
    return out[0] if single else out


def backward_params(net: Mlp, x: np.ndarray, upstream: np.ndarray) -> ParamGrad:
    """Gradient of sum(upstream * forward(net, x)) with respect to every parameter."""
    x, _ = _as_batch(net, x)
    upstream = np.atleast_2d(np.asarray(upstream, dtype=float))
    if upstream.shape != (x.shape[0], net.n_out):
        raise ShapeMismatch(f"upstream shape {upstream.shape} does not match output ({x.shape[0]}, {net.n_out})")
    d_sigma = ACTIVATIONS[net.activation][1]
    _, inputs, pre = _forward_cache(net, x)
    grad = ParamGrad.zeros_like(net)
    delta = upstream
    for i in range(len(net.weights) - 1, -1, -1):
        grad.weights[i] = delta.T @ inputs[i]
        grad.biases[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ net.weights[i]) * d_sigma(pre[i - 1])
    grad.count = 1
    return grad


def _dual_cache(net: Mlp, x: np.ndarray, t_index: int):
    if not 0 <= t_index < net.n_in:
        raise ShapeMismatch(f"t_index {t_index} outside input width {net.n_in}")
    sigma, d_sigma, _ = ACTIVATIONS[net.activation]
    a = x
    a_dot = None
    inputs, tangents, pre, pre_dot = [], [], [], []
    last = len(net.weights) - 1
    for i, (W, b) in enumerate(zip(net.weights, net.biases)):
        inputs.append(a)
        tangents.append(a_dot)
        z = a @ W.T + b
        # seed: d(input)/dt is the unit vector e_t, so the first tangent is column t of W0
        z_dot = np.broadcast_to(W[:, t_index], z.shape).copy() if a_dot is None else a_dot @ W.T
        pre.append(z)
        pre_dot.append(z_dot)
        if i == last:
            a, a_dot = z, z_dot
        else:
            a, a_dot = sigma(z), d_sigma(z) * z_dot
    return a, a_dot, inputs, tangents, pre, pre_dot


def forward_dual_t(net: Mlp, x: np.ndarray, t_index: int) -> Tuple[np.ndarray, np.ndarray]:
    """Outputs and their exact partial derivatives with respect to input[t_index]."""
    x, single = _as_batch(net, x)
    value, dvalue, *_ = _dual_cache(net, x, t_index)
    if single:
        return value[0], dvalue[0]
    return value, dvalue


def backward_dual_params(net: Mlp, x: np.ndarray, t_index: int,
                         upstream_value: np.ndarray, upstream_tangent: np.ndarray) -> ParamGrad:
    """Gradient of sum(uv * value + ut * dvalue_dt) with respect to every parameter."""
    x, _ = _as_batch(net, x)
    shape = (x.shape[0], net.n_out)
    zbar = np.broadcast_to(np.asarray(upstream_value, dtype=float).reshape(-1, net.n_out), shape)
    zdbar = np.broadcast_to(np.asarray(upstream_tangent, dtype=float).reshape(-1, net.n_out), shape)
    _, d_sigma, dd_sigma = ACTIVATIONS[net.activation]
    _, _, inputs, tangents, pre, pre_dot = _dual_cache(net, x, t_index)
    grad = ParamGrad.zeros_like(net)
    for i in range(len(net.weights) - 1, -1, -1):
        W = net.weights[i]
        if tangents[i] is None:
            # first layer: input tangent is e_t, contributing sum(zdbar) to column t only
            dW = zbar.T @ inputs[i]
            dW[:, t_index] += zdbar.sum(axis=0)
        else:
            dW = zbar.T @ inputs[i] + zdbar.T @ tangents[i]
        grad.weights[i] = dW
        grad.biases[i] = zbar.sum(axis=0)
        if i > 0:
            abar = zbar @ W
            adbar = zdbar @ W
            z_prev, z_dot_prev = pre[i - 1], pre_dot[i - 1]
            zbar = abar * d_sigma(z_prev) + adbar * dd_sigma(z_prev) * z_dot_prev
            zdbar = adbar * d_sigma(z_prev)
    grad.count = 1
    return grad
