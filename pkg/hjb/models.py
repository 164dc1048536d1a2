import math
from typing import Annotated, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from . import config
from .errors import ConfigError

# --- Control sets. 'kind' acts as the discriminator ---

class _ControlSetBase(BaseModel):
    """Shared behaviour of every compact control set U."""
    model_config = ConfigDict(frozen=True)

    periodic: bool = False

    def bounds(self) -> Tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    @property
    def dim(self) -> int:
        return self.bounds()[0].shape[0]

    def contains(self, u: np.ndarray) -> np.ndarray:
        """Membership predicate, evaluated over the last axis."""
        lo, hi = self.bounds()
        u = np.asarray(u, dtype=float)
        return np.all((u >= lo) & (u <= hi), axis=-1)

    def project(self, u: np.ndarray) -> np.ndarray:
        lo, hi = self.bounds()
        return np.clip(np.asarray(u, dtype=float), lo, hi)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        lo, hi = self.bounds()
        return rng.uniform(lo, hi, size=(n, lo.shape[0]))

    def scan_grid(self, points_per_dim: int) -> np.ndarray:
        """Tensor grid over U in lexicographic order (first coordinate most significant)."""
        lo, hi = self.bounds()
        axes = [np.linspace(lo[i], hi[i], points_per_dim) for i in range(lo.shape[0])]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)


class BoxSet(_ControlSetBase):
    kind: Literal["box"] = "box"
    lo: List[float] = Field(..., min_length=1, description="Lower corner of the box, one entry per control dimension.")
    hi: List[float] = Field(..., min_length=1, description="Upper corner of the box.")

    @model_validator(mode="after")
    def check_corners(self):
        if len(self.lo) != len(self.hi):
            raise ValueError("lo and hi must have the same length")
        if any(l > h for l, h in zip(self.lo, self.hi)):
            raise ValueError("lo must not exceed hi componentwise")
        return self

    def bounds(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.asarray(self.lo, dtype=float), np.asarray(self.hi, dtype=float)


class IntervalSet(_ControlSetBase):
    kind: Literal["interval"] = "interval"
    lo: float
    hi: float

    @model_validator(mode="after")
    def check_order(self):
        if self.lo > self.hi:
            raise ValueError("lo must not exceed hi")
        return self

    def bounds(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.array([self.lo], dtype=float), np.array([self.hi], dtype=float)


class AngleSet(_ControlSetBase):
    """Steering angles [-pi, pi], identified modulo 2*pi."""
    kind: Literal["angle"] = "angle"
    periodic: bool = True

    def bounds(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.array([config.ANGLE_LO]), np.array([config.ANGLE_HI])

    def project(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        wrapped = np.mod(u + math.pi, 2.0 * math.pi) - math.pi
        # keep already-admissible angles bitwise untouched (pi stays pi)
        return np.where((u >= -math.pi) & (u <= math.pi), u, wrapped)


ControlSet = Annotated[Union[BoxSet, IntervalSet, AngleSet], Field(discriminator="kind")]


# --- Solver and scheme parameters ---

class ArgminConfig(BaseModel):
    """How the pointwise minimizer of p.f + L over U is found."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    method: Literal["auto", "closed_form", "grid_scan"] = "auto"
    points_per_dim: Optional[int] = Field(None, ge=2, description="Grid-scan resolution; defaults depend on m.")
    tol_grad: float = Field(config.TOL_GRAD, ge=0.0)
    fallback_angle: float = config.FALLBACK_ANGLE

    def resolution(self, m: int) -> int:
        if self.points_per_dim is not None:
            return self.points_per_dim
        return config.GRID_SCAN_POINTS_LOW_DIM if m <= 2 else config.GRID_SCAN_POINTS_HIGH_DIM


class StencilConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    h: float = Field(..., gt=0.0, lt=1.0, description="Finite-difference spacing, h in (0,1).")
    d: int = Field(..., ge=1)


class GridSpec(BaseModel):
    """Regular space-time grid for the dense reference solver."""
    model_config = ConfigDict(frozen=True)

    lo: List[float] = Field(..., min_length=1)
    hi: List[float] = Field(..., min_length=1)
    h: float = Field(..., gt=0.0, lt=1.0)
    T: float = Field(..., gt=0.0)
    dt: Optional[float] = Field(None, gt=0.0, description="Time step; None picks 0.9 of the stability bound.")

    @model_validator(mode="after")
    def check_box(self):
        if len(self.lo) != len(self.hi):
            raise ValueError("lo and hi must have the same length")
        for l, u in zip(self.lo, self.hi):
            if u <= l:
                raise ValueError("hi must exceed lo in every dimension")
            cells = (u - l) / self.h
            if abs(cells - round(cells)) > 1e-9 or round(cells) < 2:
                raise ValueError(f"box width {u - l} is not a multiple (>= 2) of h={self.h}")
        return self

    @property
    def d(self) -> int:
        return len(self.lo)

    def node_counts(self) -> Tuple[int, ...]:
        return tuple(int(round((u - l) / self.h)) + 1 for l, u in zip(self.lo, self.hi))

    def axes(self) -> List[np.ndarray]:
        return [np.linspace(l, u, n) for l, u, n in zip(self.lo, self.hi, self.node_counts())]

    def dt_bound(self, f_sup_norm: float, N: float) -> float:
        return self.h / (f_sup_norm * self.d + 2.0 * N * self.d)

    def time_steps(self, f_sup_norm: float, N: float) -> Tuple[int, float]:
        """Number of slices K and the step T/K actually used."""
        dt = self.dt if self.dt is not None else config.GRID_CFL * self.dt_bound(f_sup_norm, N)
        K = max(1, int(math.ceil(self.T / dt - 1e-12)))
        return K, self.T / K


class NetworkConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    branch_hidden: List[int] = Field(default_factory=lambda: list(config.HIDDEN_WIDTHS))
    trunk_hidden: List[int] = Field(default_factory=lambda: list(config.HIDDEN_WIDTHS))
    latent_width: int = Field(config.LATENT_WIDTH, ge=1, description="p, shared output width of branch and trunk.")
    sensors: int = Field(config.SENSOR_COUNT, ge=1, description="k, number of sensor points for the terminal function.")
    activation: Literal["tanh", "relu", "sin"] = config.DEFAULT_ACTIVATION
    seed: int = 0

    @field_validator("branch_hidden", "trunk_hidden")
    @classmethod
    def positive_widths(cls, v):
        if any(w < 1 for w in v):
            raise ValueError("hidden widths must be positive")
        return v


class TrainConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    epochs: int = Field(2000, ge=0, description="Adam steps per policy iteration.")
    lr: float = Field(config.ADAM_LR, gt=0.0)
    lr_decay: float = Field(config.ADAM_LR_DECAY, gt=0.0, le=1.0,
                            description="Per-epoch multiplier on the Adam step size.")
    beta1: float = Field(config.ADAM_BETA1, ge=0.0, lt=1.0)
    beta2: float = Field(config.ADAM_BETA2, ge=0.0, lt=1.0)
    eps: float = Field(config.ADAM_EPS, gt=0.0)
    alpha1: float = Field(config.ALPHA1, ge=0.0)
    alpha2: float = Field(config.ALPHA2, ge=0.0)
    n_interior: int = Field(config.N_INTERIOR, ge=1, description="Interior collocation points resampled every epoch.")
    n_terminal: int = Field(config.N_TERMINAL, ge=1, description="Terminal collocation points resampled every epoch.")
    probe_points: int = Field(config.PROBE_POINTS, ge=1, description="Fresh points for the residual sup estimates.")
    seed: int = 0


class SchemeConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    h: float = Field(..., gt=0.0, lt=1.0, description="Stencil spacing h in (0,1).")
    N: float = Field(1.0, gt=0.0, description="Vanishing-viscosity factor.")
    M: int = Field(..., ge=0, description="Number of policy iterations.")
    T: Optional[float] = Field(None, gt=0.0, description="Horizon override; None keeps the problem's T.")
    strict_monotonicity: bool = Field(True, description="Reject N < |f|_inf / 2 instead of warning.")


class TerminalFamilyConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["benchmark", "random_quadratic", "norm", "squared_norm"] = "benchmark"
    count: int = Field(3, ge=1)
    a_range: Tuple[float, float] = (0.0, 0.6)
    b_range: Tuple[float, float] = (0.1, 0.7)
    seed: int = 0


class DiagnosticsConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    include_m1: bool = Field(False, description="Start the inner epsilon sums at m=1 instead of m=2.")
    monotonicity_probes: int = Field(1000, ge=1)


class PGDConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    steps: int = Field(config.TRANSCRIPTION_STEPS, ge=1, description="Number of Euler steps ell.")
    tol: float = Field(config.PGD_TOL, gt=0.0)
    max_iter: int = Field(config.PGD_MAX_ITER, ge=1)
    n_starts: int = Field(config.PGD_STARTS, ge=1)
    armijo_c: float = Field(config.ARMIJO_C, gt=0.0, lt=1.0)
    shrink: float = Field(config.ARMIJO_SHRINK, gt=0.0, lt=1.0)
    initial_step: float = Field(1.0, gt=0.0)
    seed: int = 0
    threads: int = Field(1, ge=1)
    strict: bool = False


class RunConfig(BaseModel):
    """Everything a training run needs, validated before any compute."""
    model_config = ConfigDict(extra="forbid")

    problem: str
    scheme: SchemeConfig
    network: NetworkConfig = Field(default_factory=NetworkConfig)
    training: TrainConfig = Field(default_factory=TrainConfig)
    terminal_family: TerminalFamilyConfig = Field(default_factory=TerminalFamilyConfig)
    argmin: ArgminConfig = Field(default_factory=ArgminConfig)
    diagnostics: DiagnosticsConfig = Field(default_factory=DiagnosticsConfig)
    transcription: PGDConfig = Field(default_factory=PGDConfig)
    output_dir: Optional[str] = None
    deterministic: bool = Field(True, description="Seeded collocation sampling; off draws it from OS entropy.")
    threads: int = Field(1, ge=1)


def validate_run_config(data: dict) -> RunConfig:
    """Validate a nested dict, turning pydantic errors into a ConfigError naming the field path."""
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        path = ".".join(str(p) for p in first["loc"])
        raise ConfigError(f"invalid config field '{path}': {first['msg']}",
                          context={"field": path, "errors": [".".join(str(p) for p in err["loc"]) for err in e.errors()]})
