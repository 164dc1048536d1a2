"""
Policy-iteration state and the append-only ledger of iterates.

The driver passes a PolicyIterationState dict between nodes; the IterationLedger is the
durable result (per-iteration value handles, residual sups and the final operator).
"""

import json
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, TypedDict

import pandas as pd

from hjb import config
from hjb.errors import ConfigError, SolverError
from hjb.problem import ControlProblem, TerminalCondition
from hjb.workspace import RunWorkspace, read_csv
from network.checkpoints import load_operator, save_operator
from network.deeponet import OperatorNetwork
from network.training import TrainingReport
from .policy import GridValueHandle, OperatorValueHandle, PolicyHandle


class PolicyIterationState(TypedDict):
    """Working state threaded through the policy-iteration nodes."""
    # Iteration index about to run
    n: int
    M: int

    # Current operator parameters (warm-started across n)
    net: Optional[OperatorNetwork]

    # Policy u_n used by the next training round
    policy: PolicyHandle

    # Finished iterates
    iterates: List["PolicyIterate"]

    # "training", "updating", "completed", "failed"
    status: str
    error_message: Optional[str]
    error: Optional[SolverError]


@dataclass
class PolicyIterate:
    n: int
    value: Any
    eps1: float
    eps2: float
    report: Optional[TrainingReport] = None

    def __post_init__(self):
        if self.eps1 < 0 or self.eps2 < 0:
            raise ValueError("residual sups must be nonnegative")


@dataclass
class IterationLedger:
    problem: ControlProblem
    g_set: List[TerminalCondition]
    initial_policy: PolicyHandle
    config_snapshot: Dict[str, Any] = field(default_factory=dict)
    iterates: List[PolicyIterate] = field(default_factory=list)
    operator: Optional[OperatorNetwork] = None
    h: float = 0.0
    N: float = 1.0
    T: Optional[float] = None

    def append(self, iterate: PolicyIterate) -> None:
        if self.iterates and iterate.n <= self.iterates[-1].n:
            raise ValueError(f"ledger index {iterate.n} does not follow {self.iterates[-1].n}")
        self.iterates.append(iterate)

    def __len__(self) -> int:
        return len(self.iterates)

    @property
    def horizon(self) -> float:
        return self.problem.T if self.T is None else self.T

    @property
    def eps1_seq(self) -> List[float]:
        return [it.eps1 for it in self.iterates]

    @property
    def eps2_seq(self) -> List[float]:
        return [it.eps2 for it in self.iterates]

    def eps_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"n": [it.n for it in self.iterates], "eps1": self.eps1_seq, "eps2": self.eps2_seq},
                            columns=["n", "eps1", "eps2"])

    @classmethod
    def from_grid_fields(cls, problem: ControlProblem, g: TerminalCondition, fields, initial_policy,
                         N: float = 1.0) -> "IterationLedger":
        """Ledger of exact grid solves; their residual sups are zero."""
        h = fields[0].spec.h if fields else 0.0
        ledger = cls(problem, [g], initial_policy, h=h, N=N, T=fields[0].spec.T if fields else None)
        for n, f in enumerate(fields):
            ledger.append(PolicyIterate(n, GridValueHandle(f), 0.0, 0.0))
        return ledger

    # --- persistence ---

    def save(self, workspace: RunWorkspace) -> None:
        """iter_<n>.npz per iterate, operator.npz, eps.csv, training_<n>.csv and manifest.json."""
        for it in self.iterates:
            if isinstance(it.value, OperatorValueHandle):
                save_operator(workspace.claim(f"iter_{it.n}.npz"), it.value.net)
            if it.report is not None:
                workspace.write_csv(f"training_{it.n}.csv", it.report.to_frame())
        if self.operator is not None:
            save_operator(workspace.claim("operator.npz"), self.operator)
        workspace.write_csv("eps.csv", self.eps_frame())
        workspace.write_manifest({
            "kind": "train",
            "ledger_format_version": config.LEDGER_FORMAT_VERSION,
            "problem": self.problem.name,
            "M": len(self.iterates),
            "h": self.h, "N": self.N, "T": self.horizon,
            "terminal_functions": [g.params | {"label": g.label} for g in self.g_set],
        })

    @classmethod
    def load(cls, run_dir: str, problem: ControlProblem, g_set: List[TerminalCondition],
             initial_policy: PolicyHandle) -> "IterationLedger":
        manifest_path = os.path.join(run_dir, "manifest.json")
        if not os.path.exists(manifest_path):
            raise ConfigError(f"{run_dir} is not a run directory (no manifest.json)", context={"run_dir": run_dir})
        with open(manifest_path, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
        if manifest.get("ledger_format_version") != config.LEDGER_FORMAT_VERSION:
            raise ConfigError("unsupported ledger format", context={"run_dir": run_dir})
        ledger = cls(problem, g_set, initial_policy, config_snapshot=manifest.get("config", {}),
                     h=float(manifest["h"]), N=float(manifest["N"]), T=float(manifest["T"]))
        eps = read_csv(os.path.join(run_dir, "eps.csv"))
        for row in eps.itertuples(index=False):
            n = int(row.n)
            path = os.path.join(run_dir, f"iter_{n}.npz")
            value = OperatorValueHandle(load_operator(path)) if os.path.exists(path) else None
            ledger.append(PolicyIterate(n, value, float(row.eps1), float(row.eps2)))
        op_path = os.path.join(run_dir, "operator.npz")
        if os.path.exists(op_path):
            ledger.operator = load_operator(op_path)
        return ledger
