"""
Bit-exact .npz checkpoints for networks.

Layout per network prefix: <prefix>widths, <prefix>activation, <prefix>seed and
<prefix>W<i>/<prefix>b<i> in layer order, plus a top-level format_version.
"""

import os
from typing import Dict

import numpy as np

from hjb import config
from hjb.errors import ConfigError
from .deeponet import OperatorNetwork
from .mlp import Mlp


def mlp_to_arrays(net: Mlp, prefix: str = "") -> Dict[str, np.ndarray]:
    arrays = {
        f"{prefix}widths": np.asarray(net.widths, dtype=np.int64),
        f"{prefix}activation": np.asarray(net.activation),
        f"{prefix}seed": np.asarray(-1 if net.seed is None else net.seed, dtype=np.int64),
    }
    for i, (W, b) in enumerate(zip(net.weights, net.biases)):
        arrays[f"{prefix}W{i}"] = W
        arrays[f"{prefix}b{i}"] = b
    return arrays


def mlp_from_arrays(arrays, prefix: str = "") -> Mlp:
    widths = tuple(int(w) for w in arrays[f"{prefix}widths"])
    seed = int(arrays[f"{prefix}seed"])
    n_layers = len(widths) - 1
    return Mlp(widths,
               tuple(np.array(arrays[f"{prefix}W{i}"]) for i in range(n_layers)),
               tuple(np.array(arrays[f"{prefix}b{i}"]) for i in range(n_layers)),
               str(arrays[f"{prefix}activation"]), None if seed < 0 else seed)


def _check_version(arrays, path: str) -> None:
    version = int(arrays["format_version"]) if "format_version" in arrays else -1
    if version != config.CHECKPOINT_FORMAT_VERSION:
        raise ConfigError(f"checkpoint {path} has format version {version}, "
                          f"expected {config.CHECKPOINT_FORMAT_VERSION}", context={"path": path})


def save_mlp(path: str, net: Mlp) -> None:
    np.savez(path, format_version=np.asarray(config.CHECKPOINT_FORMAT_VERSION), **mlp_to_arrays(net))


def load_mlp(path: str) -> Mlp:
    with np.load(path) as arrays:
        _check_version(arrays, path)
        return mlp_from_arrays(arrays)


def save_operator(path: str, net: OperatorNetwork) -> None:
    if os.path.exists(path):
        raise ConfigError(f"refusing to overwrite {path}", context={"path": path})
    np.savez(path, format_version=np.asarray(config.CHECKPOINT_FORMAT_VERSION),
             sensor_points=net.sensor_points, latent_width=np.asarray(net.latent_width),
             **mlp_to_arrays(net.branch, "branch_"), **mlp_to_arrays(net.trunk, "trunk_"))


def load_operator(path: str) -> OperatorNetwork:
    with np.load(path) as arrays:
        _check_version(arrays, path)
        return OperatorNetwork(mlp_from_arrays(arrays, "branch_"), mlp_from_arrays(arrays, "trunk_"),
                               np.array(arrays["sensor_points"]))
