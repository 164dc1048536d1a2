import logging
import math
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from hjb import config
from hjb.errors import DivergenceDetected
from hjb.models import TrainConfig
from hjb.problem import ControlProblem, TerminalCondition
from .adam import AdamState, adam_step
from .deeponet import CollocationSet, OperatorNetwork, estimate_residual_sups, loss_and_gradient, loss_terms

logger = logging.getLogger(__name__)

REPORT_COLUMNS = ["epoch", "L1", "L2", "eps1_hat", "eps2_hat", "wall_ms"]


@dataclass
class TrainingReport:
    """Per-epoch losses; the estimated residual sups are filled in on the final row."""
    rows: List[Dict[str, float]] = field(default_factory=list)
    eps1_hat: float = math.nan
    eps2_hat: float = math.nan

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=REPORT_COLUMNS)

    @property
    def final_L1(self) -> float:
        return self.rows[-1]["L1"]

    @property
    def final_L2(self) -> float:
        return self.rows[-1]["L2"]


def _check_finite(epoch: int, total: float) -> None:
    if not math.isfinite(total) or total > config.DIVERGENCE_LIMIT:
        raise DivergenceDetected(f"training loss {total} at epoch {epoch}",
                                 context={"epoch": epoch, "loss": total})


def train_operator(net: OperatorNetwork, g_set: Sequence[TerminalCondition], policy, colloc: Optional[CollocationSet],
                   h: float, N: float, problem: ControlProblem, opt: AdamState, schedule: TrainConfig,
                   rng: Optional[np.random.Generator] = None, resample: bool = True,
                   T: Optional[float] = None) -> Tuple[OperatorNetwork, TrainingReport]:
    """
    Minimize alpha1 * L1 + alpha2 * L2 with one Adam step per epoch.

    A fresh collocation set is drawn every epoch unless `resample` is off, in which case
    `colloc` is reused throughout. Returns the trained network and its report.
    """
    rng = rng if rng is not None else np.random.default_rng(schedule.seed)
    T = problem.T if T is None else T

    def batch() -> CollocationSet:
        if colloc is not None and not resample:
            return colloc
        return CollocationSet.sample(problem, schedule.n_interior, schedule.n_terminal, rng, T)

    report = TrainingReport()
    start = time.perf_counter()
    if schedule.epochs == 0:
        losses = loss_terms(net, g_set, policy, colloc if colloc is not None else batch(), h, N, problem)
        _check_finite(0, schedule.alpha1 * losses.L1 + schedule.alpha2 * losses.L2)
        report.rows.append({"epoch": 0, "L1": losses.L1, "L2": losses.L2, "eps1_hat": math.nan,
                            "eps2_hat": math.nan, "wall_ms": (time.perf_counter() - start) * 1e3})

    for epoch in range(1, schedule.epochs + 1):
        total, losses, grads = loss_and_gradient(net, g_set, policy, batch(), h, N, problem,
                                                 schedule.alpha1, schedule.alpha2)
        _check_finite(epoch, total)
        net = net.with_parameters(adam_step(opt, net.parameters(), grads))
        opt.lr *= schedule.lr_decay
        report.rows.append({"epoch": epoch, "L1": losses.L1, "L2": losses.L2, "eps1_hat": math.nan,
                            "eps2_hat": math.nan, "wall_ms": (time.perf_counter() - start) * 1e3})
        if epoch % 100 == 0:
            logger.debug("epoch %d: L1=%.4e L2=%.4e", epoch, losses.L1, losses.L2)

    eps1, eps2 = estimate_residual_sups(net, g_set, policy, problem, h, N, schedule.probe_points, rng, T)
    report.eps1_hat, report.eps2_hat = eps1, eps2
    report.rows[-1]["eps1_hat"] = eps1
    report.rows[-1]["eps2_hat"] = eps2
    logger.info("--- Operator trained: %d epochs, L1=%.3e, L2=%.3e, eps1_hat=%.3e, eps2_hat=%.3e ---",
                schedule.epochs, report.final_L1, report.final_L2, eps1, eps2)
    return net, report
