"""
Error types shared by every solver path.

All of them derive from SolverError, which carries a message, an optional context
dict for machine-readable error records, and the exit code the CLI should use.
"""

from typing import Any, Dict, Optional


class SolverError(Exception):
    """Base class for every failure the solvers report on purpose."""
    exit_code = 3

    def __init__(self, message: str = "Solver failure.", context: Optional[Dict[str, Any]] = None):
        self.message = message
        self.context = context or {}
        super().__init__(self.message)

    def to_record(self) -> Dict[str, Any]:
        return {"error": type(self).__name__, "message": self.message, "context": self.context}


class ConfigError(SolverError):
    exit_code = 2


class UnknownProblem(ConfigError):
    pass


class OracleInapplicable(SolverError):
    exit_code = 4


class NoMinimizer(SolverError):
    pass


class NonDiagonalR(NoMinimizer):
    pass


class DegenerateGradient(SolverError):
    pass


class ShapeMismatch(SolverError):
    pass


class SensorMismatch(SolverError):
    pass


class EmptyCollocation(SolverError):
    pass


class DivergenceDetected(SolverError):
    pass


class NViolatesMonotonicityBound(SolverError):
    pass


class EmptySequence(SolverError):
    pass


class UnstableSpec(SolverError):
    pass


class NonFiniteValue(SolverError):
    pass


class NotConverged(SolverError):
    """Raised only in strict mode; `context["solution"]` holds the best iterate found."""


class TrajectoryEscapedDomain(UserWarning):
    """A synthesized trajectory left the inflated working box. Recorded, never fatal."""
