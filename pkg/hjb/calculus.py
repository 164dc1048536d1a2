"""
Central-difference gradient and discrete Laplacian on arbitrary scalar fields.

Stencil layout for a point x in d dimensions, shared by every routine here:
row 2i is x + h e_i, row 2i+1 is x - h e_i.
"""

from typing import Callable

import numpy as np

from .errors import ShapeMismatch
from .models import StencilConfig


def stencil_points(x: np.ndarray, h: float) -> np.ndarray:
    """The 2d neighbours of x (or of every row of a (n, d) batch), shape (..., 2d, d)."""
    x = np.asarray(x, dtype=float)
    d = x.shape[-1]
    shifts = np.zeros((2 * d, d))
    for i in range(d):
        shifts[2 * i, i] = h
        shifts[2 * i + 1, i] = -h
    return x[..., None, :] + shifts


def nabla_from_values(values: np.ndarray, h: float) -> np.ndarray:
    """Gradient from stencil values laid out as (..., 2d)."""
    plus = values[..., 0::2]
    minus = values[..., 1::2]
    return (plus - minus) / (2.0 * h)


def laplace_from_values(center: np.ndarray, values: np.ndarray, h: float) -> np.ndarray:
    plus = values[..., 0::2]
    minus = values[..., 1::2]
    return np.sum((plus - 2.0 * center[..., None] + minus) / (h * h), axis=-1)


def _check(x: np.ndarray, cfg: StencilConfig) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != cfg.d:
        raise ShapeMismatch(f"point has dimension {x.shape[-1]}, stencil expects {cfg.d}")
    return x


def nabla_h(field: Callable[[np.ndarray], float], x: np.ndarray, cfg: StencilConfig) -> np.ndarray:
    """Central-difference gradient at a single point, 2d field evaluations."""
    x = _check(x, cfg)
    points = stencil_points(x, cfg.h)
    values = np.array([field(points[j]) for j in range(2 * cfg.d)], dtype=float)
    return nabla_from_values(values, cfg.h)


def laplace_h(field: Callable[[np.ndarray], float], x: np.ndarray, cfg: StencilConfig) -> float:
    """Discrete Laplacian at a single point, 2d+1 field evaluations."""
    x = _check(x, cfg)
    points = stencil_points(x, cfg.h)
    center = np.asarray(field(x), dtype=float)
    values = np.array([field(points[j]) for j in range(2 * cfg.d)], dtype=float)
    return float(laplace_from_values(center, values, cfg.h))


def nabla_h_batch(field: Callable[[np.ndarray], np.ndarray], points: np.ndarray, cfg: StencilConfig) -> np.ndarray:
    """Gradients at n points with one batched call on all 2d*n stencil points.

    `field` maps (N, d) to (N,). Stencil rows are evaluated point by point in order.
    """
    points = np.atleast_2d(_check(points, cfg))
    n = points.shape[0]
    stencil = stencil_points(points, cfg.h).reshape(n * 2 * cfg.d, cfg.d)
    values = np.asarray(field(stencil), dtype=float).reshape(n, 2 * cfg.d)
    return nabla_from_values(values, cfg.h)


def laplace_h_batch(field: Callable[[np.ndarray], np.ndarray], points: np.ndarray, cfg: StencilConfig) -> np.ndarray:
    points = np.atleast_2d(_check(points, cfg))
    n = points.shape[0]
    stencil = stencil_points(points, cfg.h).reshape(n * 2 * cfg.d, cfg.d)
    values = np.asarray(field(np.concatenate([points, stencil])), dtype=float)
    return laplace_from_values(values[:n], values[n:].reshape(n, 2 * cfg.d), cfg.h)
