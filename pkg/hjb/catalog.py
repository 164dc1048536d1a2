"""
Built-in benchmark problems and their default run settings.
"""

import itertools
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Tuple

import numpy as np
import pandas as pd
from rapidfuzz import process

from knowledge_base.benchmarks import (
    DESK_SCHEME, INFERENCE_TARGETS, LQR5X3_A, LQR5X3_B, LQR10X5_A, LQR10X5_B, LQR_CONTROL_BOX,
    PAPER_SCHEME, PROBLEM_ALIASES, TRAJECTORY_STARTS, WORKING_BOX,
)
from .errors import UnknownProblem
from .models import AngleSet, BoxSet, SchemeConfig, TerminalFamilyConfig
from .problem import ControlProblem, TerminalCondition

logger = logging.getLogger(__name__)

PROBLEM_IDS = ["vehicle2d", "lqr5x3", "lqr10x5"]


@dataclass(frozen=True)
class ProblemCatalogEntry:
    id: str
    problem: ControlProblem
    paper_defaults: SchemeConfig
    desk_defaults: SchemeConfig
    inference_targets: List[Tuple[float, float]] = field(default_factory=list)
    trajectory_starts: List[Tuple[float, ...]] = field(default_factory=list)


def resolve_problem_id(name: str) -> str:
    """
    Resolves a user-supplied problem name to a canonical id.

    - Exact aliases win outright.
    - Otherwise fuzzy matching with RapidFuzz; weak matches are rejected.
    """
    clean_name = str(name).lower().strip()
    if clean_name in PROBLEM_ALIASES:
        return PROBLEM_ALIASES[clean_name]
    match = process.extractOne(clean_name, list(PROBLEM_ALIASES.keys()))
    if match is None or match[1] < 80:
        raise UnknownProblem(f"unknown problem '{name}'", context={"known": PROBLEM_IDS})
    logger.info("--- Resolved problem '%s' to '%s' ---", name, PROBLEM_ALIASES[match[0]])
    return PROBLEM_ALIASES[match[0]]


def _batch_shape(t, x, u) -> Tuple[int, ...]:
    return np.broadcast_shapes(np.shape(t), np.shape(x)[:-1], np.shape(u)[:-1])


# --- vehicle: unit-speed steering in the plane ---

def _vehicle_dynamics(t, x, u):
    u = np.asarray(u, dtype=float)
    heading = np.stack([np.cos(u[..., 0]), np.sin(u[..., 0])], axis=-1)
    return np.broadcast_to(heading, _batch_shape(t, x, u) + (2,)).copy()


def _vehicle_cost(t, x, u):
    return np.zeros(_batch_shape(t, x, u))


def _vehicle_jac_x(t, x, u):
    return np.zeros(_batch_shape(t, x, u) + (2, 2))


def _vehicle_jac_u(t, x, u):
    u = np.asarray(u, dtype=float)
    col = np.stack([-np.sin(u[..., 0]), np.cos(u[..., 0])], axis=-1)[..., None]
    return np.broadcast_to(col, _batch_shape(t, x, u) + (2, 1)).copy()


def _vehicle_cost_grad_x(t, x, u):
    return np.zeros(_batch_shape(t, x, u) + (2,))


def _vehicle_cost_grad_u(t, x, u):
    return np.zeros(_batch_shape(t, x, u) + (1,))


def build_vehicle() -> ControlProblem:
    lo, hi = WORKING_BOX["vehicle2d"]
    return ControlProblem(
        name="vehicle2d", d=2, m=1, T=PAPER_SCHEME["vehicle2d"]["T"],
        dynamics=_vehicle_dynamics, running_cost=_vehicle_cost, control_set=AngleSet(),
        box_lo=np.full(2, lo), box_hi=np.full(2, hi),
        f_sup_norm=1.0, steering=True,
        dynamics_jac_x=_vehicle_jac_x, dynamics_jac_u=_vehicle_jac_u,
        cost_grad_x=_vehicle_cost_grad_x, cost_grad_u=_vehicle_cost_grad_u,
    )


# --- box-constrained LQR: f = Ax + Bu, L = |x|^2 + |u|^2 ---

def _lqr_sup_norm(A: np.ndarray, B: np.ndarray, box: Tuple[float, float], u_box: Tuple[float, float]) -> float:
    # |Ax + Bu| is convex, so its maximum over the product box sits on a vertex
    d, m = B.shape
    M = np.hstack([A, B])
    corners = [box] * d + [u_box] * m
    best = 0.0
    for chunk in _vertex_chunks(corners):
        best = max(best, float(np.linalg.norm(chunk @ M.T, axis=-1).max()))
    return best


def _vertex_chunks(corners, size: int = 4096):
    buf = []
    for v in itertools.product(*corners):
        buf.append(v)
        if len(buf) == size:
            yield np.asarray(buf)
            buf = []
    if buf:
        yield np.asarray(buf)


def build_lqr(problem_id: str) -> ControlProblem:
    A = np.array(LQR5X3_A if problem_id == "lqr5x3" else LQR10X5_A, dtype=float)
    B = np.array(LQR5X3_B if problem_id == "lqr5x3" else LQR10X5_B, dtype=float)
    d, m = B.shape
    lo, hi = WORKING_BOX[problem_id]
    u_lo, u_hi = LQR_CONTROL_BOX

    def dynamics(t, x, u):
        out = np.asarray(x) @ A.T + np.asarray(u) @ B.T
        return np.broadcast_to(out, _batch_shape(t, x, u) + (d,)).copy()

    def running_cost(t, x, u):
        x = np.asarray(x)
        u = np.asarray(u)
        out = np.sum(x * x, axis=-1) + np.sum(u * u, axis=-1)
        return np.broadcast_to(out, _batch_shape(t, x, u)).copy()

    return ControlProblem(
        name=problem_id, d=d, m=m, T=PAPER_SCHEME[problem_id]["T"],
        dynamics=dynamics, running_cost=running_cost,
        control_set=BoxSet(lo=[u_lo] * m, hi=[u_hi] * m),
        box_lo=np.full(d, lo), box_hi=np.full(d, hi),
        f_sup_norm=_lqr_sup_norm(A, B, (lo, hi), (u_lo, u_hi)),
        input_matrix=B, control_weight=np.ones(m),
        dynamics_jac_x=lambda t, x, u: np.broadcast_to(A, _batch_shape(t, x, u) + (d, d)).copy(),
        dynamics_jac_u=lambda t, x, u: np.broadcast_to(B, _batch_shape(t, x, u) + (d, m)).copy(),
        cost_grad_x=lambda t, x, u: np.broadcast_to(2.0 * np.asarray(x), _batch_shape(t, x, u) + (d,)).copy(),
        cost_grad_u=lambda t, x, u: np.broadcast_to(2.0 * np.asarray(u), _batch_shape(t, x, u) + (m,)).copy(),
        metadata={"A": A, "B": B, "Q": np.eye(d), "R": np.eye(m)},
    )


def paper_defaults(problem_id: str) -> SchemeConfig:
    problem_id = resolve_problem_id(problem_id)
    return SchemeConfig(**PAPER_SCHEME[problem_id])


def desk_defaults(problem_id: str) -> SchemeConfig:
    problem_id = resolve_problem_id(problem_id)
    return SchemeConfig(**DESK_SCHEME[problem_id])


def build(problem_id: str) -> Tuple[ControlProblem, SchemeConfig]:
    """Construct a built-in problem and its published scheme defaults."""
    problem_id = resolve_problem_id(problem_id)
    problem = build_vehicle() if problem_id == "vehicle2d" else build_lqr(problem_id)
    return problem, paper_defaults(problem_id)


def catalog_entry(problem_id: str) -> ProblemCatalogEntry:
    problem_id = resolve_problem_id(problem_id)
    problem, paper = build(problem_id)
    return ProblemCatalogEntry(
        id=problem_id, problem=problem, paper_defaults=paper, desk_defaults=desk_defaults(problem_id),
        inference_targets=list(INFERENCE_TARGETS[problem_id]),
        trajectory_starts=list(TRAJECTORY_STARTS[problem_id]),
    )


def terminal_family(problem: ControlProblem, sensor_points: np.ndarray,
                    cfg: TerminalFamilyConfig) -> List[TerminalCondition]:
    """Training terminal functions for a problem, all encoded on the given sensors."""
    if cfg.kind == "norm":
        return [TerminalCondition.norm(sensor_points)]
    if cfg.kind == "squared_norm":
        return [TerminalCondition.squared_norm(sensor_points)]
    if cfg.kind == "benchmark":
        if problem.steering:
            return [TerminalCondition.norm(sensor_points)]
        return [TerminalCondition.quadratic(0.3, 0.1 * k, sensor_points) for k in (1, 2, 3)]
    rng = np.random.default_rng(cfg.seed)
    a = rng.uniform(cfg.a_range[0], cfg.a_range[1], size=cfg.count)
    b = rng.uniform(cfg.b_range[0], cfg.b_range[1], size=cfg.count)
    return [TerminalCondition.quadratic(ai, bi, sensor_points) for ai, bi in zip(a, b)]


def run_config_defaults(problem_id: str, desk_scale: bool = False) -> Dict[str, Any]:
    """Nested defaults for a RunConfig; config files and flags are layered on top."""
    problem_id = resolve_problem_id(problem_id)
    scheme = DESK_SCHEME[problem_id] if desk_scale else PAPER_SCHEME[problem_id]
    training: Dict[str, Any] = {"epochs": 2000, "n_interior": 2000, "n_terminal": 500}
    if desk_scale and problem_id == "lqr10x5":
        training.update({"n_interior": 1000, "n_terminal": 250})
    return {
        "problem": problem_id,
        "scheme": dict(scheme),
        "network": {"branch_hidden": [64, 64], "trunk_hidden": [64, 64], "latent_width": 64, "sensors": 100},
        "training": training,
    }


def catalog_listing() -> pd.DataFrame:
    rows = []
    for problem_id in PROBLEM_IDS:
        entry = catalog_entry(problem_id)
        p = entry.problem
        rows.append({
            "id": problem_id, "d": p.d, "m": p.m, "T": p.T,
            "control_set": p.control_set.kind,
            "box": f"[{p.box_lo[0]:g}, {p.box_hi[0]:g}]^{p.d}",
            "f_sup_norm": p.f_sup_norm,
            "paper_h": entry.paper_defaults.h, "paper_M": entry.paper_defaults.M, "paper_N": entry.paper_defaults.N,
            "desk_h": entry.desk_defaults.h,
        })
    return pd.DataFrame(rows)
