"""
This file contains the literal data of the built-in benchmark problems.
Matrices are stored exactly as printed, row by row.
"""

# Canonical problem ids and the aliases that resolve to them
PROBLEM_ALIASES = {
    "vehicle2d": "vehicle2d",
    "vehicle": "vehicle2d",
    "dubins": "vehicle2d",
    "lqr5x3": "lqr5x3",
    "lqr5": "lqr5x3",
    "lqr": "lqr5x3",
    "lqr10x5": "lqr10x5",
    "lqr10": "lqr10x5",
}

LQR5X3_A = [
    [0.08, 0.01, 0.01, 0.15, 0.05],
    [0.16, 0.16, 0.15, 0.18, 0.16],
    [0.14, 0.17, 0.07, 0.08, 0.12],
    [0.12, 0.15, 0.11, 0.18, 0.02],
    [0.12, 0.08, 0.13, 0.10, 0.09],
]

LQR5X3_B = [
    [0.00, 0.05, 0.06],
    [0.07, 0.01, 0.04],
    [0.02, 0.00, 0.10],
    [0.09, 0.08, 0.08],
    [0.01, 0.07, 0.05],
]

LQR10X5_A = [
    [0.00, 0.15, 0.01, 0.11, 0.03, 0.19, 0.06, 0.07, 0.14, 0.07],
    [0.06, 0.10, 0.14, 0.09, 0.16, 0.01, 0.15, 0.17, 0.09, 0.11],
    [0.11, 0.02, 0.10, 0.19, 0.04, 0.14, 0.18, 0.01, 0.10, 0.16],
    [0.15, 0.13, 0.01, 0.17, 0.04, 0.06, 0.16, 0.03, 0.08, 0.15],
    [0.02, 0.19, 0.19, 0.17, 0.13, 0.15, 0.00, 0.17, 0.08, 0.17],
    [0.07, 0.00, 0.02, 0.14, 0.10, 0.08, 0.13, 0.07, 0.03, 0.05],
    [0.00, 0.15, 0.16, 0.12, 0.17, 0.06, 0.05, 0.14, 0.18, 0.10],
    [0.02, 0.10, 0.14, 0.12, 0.17, 0.01, 0.15, 0.08, 0.10, 0.17],
    [0.04, 0.03, 0.07, 0.02, 0.13, 0.10, 0.01, 0.13, 0.15, 0.09],
    [0.00, 0.12, 0.07, 0.01, 0.09, 0.15, 0.06, 0.05, 0.08, 0.05],
]

LQR10X5_B = [
    [0.02, 0.05, 0.09, 0.08, 0.06],
    [0.05, 0.06, 0.10, 0.10, 0.01],
    [0.06, 0.01, 0.05, 0.04, 0.05],
    [0.02, 0.09, 0.00, 0.03, 0.07],
    [0.07, 0.09, 0.02, 0.05, 0.05],
    [0.00, 0.02, 0.03, 0.05, 0.03],
    [0.04, 0.07, 0.03, 0.01, 0.03],
    [0.10, 0.05, 0.02, 0.05, 0.03],
    [0.08, 0.06, 0.08, 0.06, 0.09],
    [0.00, 0.00, 0.06, 0.04, 0.05],
]

LQR_CONTROL_BOX = (-1.0 / 3.0, 1.0 / 2.0)

# Scheme scalars as published, keyed by problem id
PAPER_SCHEME = {
    "vehicle2d": {"h": 0.005, "M": 5, "N": 1.0, "T": 1.0},
    "lqr5x3": {"h": 0.005, "M": 3, "N": 1.0, "T": 0.5},
    "lqr10x5": {"h": 0.005, "M": 3, "N": 1.0, "T": 0.5},
}

# Reduced scheme that finishes on a laptop
DESK_SCHEME = {
    "vehicle2d": {"h": 0.05, "M": 5, "N": 1.0, "T": 1.0},
    "lqr5x3": {"h": 0.05, "M": 3, "N": 1.0, "T": 0.5},
    "lqr10x5": {"h": 0.05, "M": 3, "N": 1.0, "T": 0.5},
}

WORKING_BOX = {
    "vehicle2d": (-2.0, 2.0),
    "lqr5x3": (-1.0, 1.0),
    "lqr10x5": (-1.0, 1.0),
}

# Terminal functions used after training, as (a, b) in a + b|x|^2
INFERENCE_TARGETS = {
    "vehicle2d": [],
    "lqr5x3": [(0.0, 0.57), (0.0, 0.45)],
    "lqr10x5": [(0.0, 0.58), (0.0, 0.42)],
}

TRAJECTORY_STARTS = {
    "vehicle2d": [(-1.5, -0.5), (-1.0, -0.5), (0.5, -0.5), (0.0, -0.5)],
    "lqr5x3": [],
    "lqr10x5": [],
}

# Vehicle value slice: second coordinate fixed, first coordinate swept
VEHICLE_PROBE_LINE = {"fixed_axis": 1, "fixed_value": -0.5, "lo": -1.5, "hi": 1.5, "count": 50}
