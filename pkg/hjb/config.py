"""
Central configuration for solver defaults.
Every tunable constant lives here so the numerical modules never hard-code them.
"""

import os
import math

from dotenv import load_dotenv

load_dotenv()

CODE_VERSION = "0.3.0"

# Default output root for CLI runs. Overridable through the environment or a .env file.
OUTPUT_ROOT = os.getenv("HJB_OUTPUT_ROOT", os.path.join(os.getcwd(), "runs"))
LOG_LEVEL = os.getenv("HJB_LOG_LEVEL", "INFO")

# --- ocp-core ---
TOL_GRAD = 1e-10
FALLBACK_ANGLE = 0.0
GRID_SCAN_POINTS_LOW_DIM = 512   # m <= 2
GRID_SCAN_POINTS_HIGH_DIM = 64   # m >= 3
F_SUP_SOBOL_LOG2 = 17            # 2**17 >= 1e5 Sobol samples
F_SUP_SAFETY = 1.1
F_SUP_CHECK_SAMPLES = 1000
FD_STEP = 1e-6                   # central-difference fallback for missing Jacobians

# --- nn-autodiff ---
ADAM_LR = 1e-3
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
ADAM_LR_DECAY = 1.0
DEFAULT_ACTIVATION = "tanh"
CHECKPOINT_FORMAT_VERSION = 1

# --- deeponet ---
ALPHA1 = 1.0
ALPHA2 = 10.0
N_INTERIOR = 2000
N_TERMINAL = 500
SENSOR_COUNT = 100
LATENT_WIDTH = 64
HIDDEN_WIDTHS = [64, 64]
PROBE_POINTS = 10_000
DIVERGENCE_LIMIT = 1e6

# --- policy-iteration ---
ROLLOUT_STEPS = 100              # default dt = T / ROLLOUT_STEPS
ESCAPE_INFLATION = 1.5           # working box half-width multiplier before a trajectory "escapes"
LEDGER_FORMAT_VERSION = 1

# --- grid-oracle ---
GRID_CFL = 0.9
GRID_MONOTONE_TOL = 1e-8
GRID_BOUNDARY_MARGIN = 5         # acceptance probes stay this many h inside the box

# --- transcription-oracle ---
TRANSCRIPTION_STEPS = 50
PGD_TOL = 1e-8
PGD_MAX_ITER = 5000
PGD_STARTS = 8
ARMIJO_C = 1e-4
ARMIJO_SHRINK = 0.5
ARMIJO_MAX_HALVINGS = 50

ANGLE_LO = -math.pi
ANGLE_HI = math.pi
