from dataclasses import dataclass
from typing import ClassVar, List, Sequence

import numpy as np

from hjb import config
from hjb.errors import ShapeMismatch


@dataclass
class AdamState:
    """
    Adam moments for a list of parameter arrays.

    m_t = b1 m + (1 - b1) g, v_t = b2 v + (1 - b2) g^2, bias-corrected, then
    theta -= lr * m_hat / (sqrt(v_hat) + eps).
    """
    m: List[np.ndarray]
    v: List[np.ndarray]
    lr: float = config.ADAM_LR
    beta1: float = config.ADAM_BETA1
    beta2: float = config.ADAM_BETA2
    eps: float = config.ADAM_EPS
    t: int = 0

    # Steps taken by every AdamState in this process; inference must leave it untouched.
    total_steps: ClassVar[int] = 0

    @classmethod
    def for_parameters(cls, params: Sequence[np.ndarray], lr: float = config.ADAM_LR,
                       beta1: float = config.ADAM_BETA1, beta2: float = config.ADAM_BETA2,
                       eps: float = config.ADAM_EPS) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params],
                   lr=lr, beta1=beta1, beta2=beta2, eps=eps)


def adam_step(state: AdamState, params: Sequence[np.ndarray], grads: Sequence[np.ndarray]) -> List[np.ndarray]:
    """One bias-corrected Adam update. Returns new parameter arrays; the state is advanced in place."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeMismatch(f"{len(params)} parameter arrays, {len(grads)} gradients, {len(state.m)} moments")
    for p, g, m in zip(params, grads, state.m):
        if p.shape != g.shape or p.shape != m.shape:
            raise ShapeMismatch(f"parameter shape {p.shape} vs gradient {g.shape} vs moment {m.shape}")

    state.t += 1
    AdamState.total_steps += 1
    b1, b2 = state.beta1, state.beta2
    corr1 = 1.0 - b1 ** state.t
    corr2 = 1.0 - b2 ** state.t
    updated = []
    for i, (p, g) in enumerate(zip(params, grads)):
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g
        m_hat = state.m[i] / corr1
        v_hat = state.v[i] / corr2
        updated.append(p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps))
    return updated
