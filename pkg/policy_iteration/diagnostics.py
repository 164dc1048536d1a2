"""
Residual diagnostics for a policy-iteration ledger.

The residual sups on a ledger are estimates taken on finite probe sets, so every number
reported here is advisory: a lower bound on the true sup, not a certificate.
"""

import logging
import warnings
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from hjb import config
from hjb.errors import ConfigError, EmptySequence
from .state import IterationLedger

logger = logging.getLogger(__name__)


def _partial_sum(seq: np.ndarray, start: int) -> float:
    n = seq.shape[0] - 1
    if n == 0:
        return float(seq[0])
    inner = float(np.sum(seq[start:n])) if n > start else 0.0
    return float(seq[0] + 2.0 * inner + seq[n])


def epsilon_bound(eps1_seq: Sequence[float], eps2_seq: Sequence[float], t: float, T: float,
                  include_m1: bool = False) -> float:
    """
    Cumulative error bound at the last available iterate n:

        (T - t) (e1_0 + 2 sum_{m=2}^{n-1} e1_m + e1_n) + (e2_0 + 2 sum_{m=2}^{n-1} e2_m + e2_n)

    With include_m1 the inner sums start at m = 1. A single iterate counts once.
    """
    e1 = np.asarray(eps1_seq, dtype=float)
    e2 = np.asarray(eps2_seq, dtype=float)
    if e1.size == 0 or e2.size == 0:
        raise EmptySequence("epsilon_bound needs at least one iterate")
    if e1.shape != e2.shape:
        raise ConfigError(f"eps sequences differ in length ({e1.size} vs {e2.size})")
    if np.any(e1 < 0) or np.any(e2 < 0):
        raise ConfigError("residual sups must be nonnegative")
    if not 0.0 <= t <= T:
        raise ConfigError(f"t={t} is outside [0, {T}]")
    start = 1 if include_m1 else 2
    return (T - t) * _partial_sum(e1, start) + _partial_sum(e2, start)


def epsilon_report(ledger: IterationLedger, include_m1: bool = False) -> pd.DataFrame:
    """Per-iterate residual sups and the bound at t = 0 using iterates 0..n."""
    T = ledger.horizon
    rows = []
    for i, it in enumerate(ledger.iterates):
        rows.append({"n": it.n, "eps1_hat": it.eps1, "eps2_hat": it.eps2,
                     "epsilon_t0": epsilon_bound(ledger.eps1_seq[:i + 1], ledger.eps2_seq[:i + 1], 0.0, T,
                                                 include_m1)})
    return pd.DataFrame(rows, columns=["n", "eps1_hat", "eps2_hat", "epsilon_t0"])


def monotonicity_check(ledger: IterationLedger, probe_points: np.ndarray, probe_times: Optional[np.ndarray] = None,
                       tol: float = config.GRID_MONOTONE_TOL) -> pd.DataFrame:
    """
    For each consecutive pair (n, n+1): the largest increase v_{n+1} - v_n over the probes and
    the fraction of probes where v_{n+1} > v_n + tau + tol, with
    tau = 2 (e2_n + e2_{n+1}) + 2 T (e1_n + e1_{n+1}).

    Operator iterates are compared for every terminal function of the ledger.
    """
    x = np.atleast_2d(np.asarray(probe_points, dtype=float))
    t = np.zeros(x.shape[0]) if probe_times is None else np.broadcast_to(np.asarray(probe_times, dtype=float),
                                                                          (x.shape[0],))
    T = ledger.horizon
    rows = []
    for prev, nxt in zip(ledger.iterates, ledger.iterates[1:]):
        tau = 2.0 * (prev.eps2 + nxt.eps2) + 2.0 * T * (prev.eps1 + nxt.eps1)
        increases = []
        for g in ledger.g_set:
            increases.append(np.asarray(nxt.value.value(t, x, g)) - np.asarray(prev.value.value(t, x, g)))
        diff = np.concatenate(increases) if increases else np.zeros(0)
        violations = float(np.mean(diff > tau + tol)) if diff.size else 0.0
        rows.append({"n": prev.n, "max_increase": float(diff.max()) if diff.size else 0.0,
                     "slack": tau, "violation_fraction": violations, "probes": int(diff.size)})
        if violations > 0:
            logger.warning("--- Monotonicity n=%d -> %d: %.2f%% of probes above slack %.3g ---",
                           prev.n, nxt.n, 100.0 * violations, tau)
    return pd.DataFrame(rows, columns=["n", "max_increase", "slack", "violation_fraction", "probes"])


def residual_trend_check(ledger: IterationLedger, window: int = 3, required: int = 2) -> bool:
    """
    Soft check that the combined residual T*e1 + e2 decreased in at least `required` of the
    last `window` iterations. Warns instead of failing.
    """
    if len(ledger) < 2:
        logger.info("--- Residual trend: fewer than two iterates, nothing to check ---")
        return True
    T = ledger.horizon
    combined = [T * it.eps1 + it.eps2 for it in ledger.iterates]
    steps = list(zip(combined[:-1], combined[1:]))[-window:]
    decreases = sum(1 for a, b in steps if b < a)
    needed = min(required, len(steps))
    if decreases < needed:
        message = f"residual sups decreased in only {decreases} of the last {len(steps)} iterations"
        logger.warning("--- %s ---", message)
        warnings.warn(message, RuntimeWarning)
        return False
    return True
