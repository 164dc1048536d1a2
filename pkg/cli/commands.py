"""
Command implementations behind main.py.

Each cmd_* takes the parsed argparse namespace, writes into a fresh write-once directory
and returns that directory. Failures surface as SolverError subclasses; main.py turns
them into a JSON error record and an exit code.
"""

import json
import logging
import os
import re
from typing import Any, Dict, List, Tuple

import numpy as np
import pandas as pd
from pydantic import ValidationError

from hjb import config
from hjb.catalog import build, catalog_listing, resolve_problem_id, run_config_defaults
from hjb.errors import ConfigError, OracleInapplicable, SolverError
from hjb.models import GridSpec, RunConfig, validate_run_config
from hjb.problem import ControlProblem, TerminalCondition
from hjb.workspace import RunWorkspace, config_hash, read_csv
from knowledge_base.benchmarks import VEHICLE_PROBE_LINE
from network.adam import AdamState
from policy_iteration import (
    IterationLedger, InitialPolicy, epsilon_report, monotonicity_check, prepare_run, residual_trend_check,
    run_policy_iteration, synthesize_trajectory, value_along,
)
from policy_iteration.synthesis import final_value_handle
from solvers.grid_oracle import GridField, grid_policy_iteration, hopf_lax_vehicle
from solvers.transcription import TranscriptionProblem, transcribe_and_solve
from .config_file import read_config_file, layered_run_config
from .plots import plot_columns

logger = logging.getLogger(__name__)

_QUADRATIC = re.compile(
    r"^\s*(?:(?P<a>[-+]?\d*\.?\d+(?:[eE][-+]?\d+)?)\s*(?P<sign>[-+])\s*)?"
    r"(?P<b>\d*\.?\d+(?:[eE][-+]?\d+)?)\s*\*\s*\|x\|\^2\s*$"
)


# --- configuration ---

def resolve_run_config(args) -> RunConfig:
    """Catalog defaults < config file < command-line flags."""
    file_data: Dict[str, Any] = read_config_file(args.config) if getattr(args, "config", None) else {}
    name = getattr(args, "problem", None) or file_data.get("problem")
    if not name:
        raise ConfigError("no problem given (--problem or 'problem' in the config file)", context={"field": "problem"})
    problem_id = resolve_problem_id(name)
    flags: Dict[str, Any] = {"problem": problem_id}
    if getattr(args, "seed", None) is not None:
        flags["network"] = {"seed": args.seed}
        flags["training"] = {"seed": args.seed}
    if getattr(args, "threads", None):
        flags["threads"] = args.threads
        flags["transcription"] = {"threads": args.threads}
    if getattr(args, "out", None):
        flags["output_dir"] = args.out
    file_data = dict(file_data, problem=problem_id)
    return layered_run_config(run_config_defaults(problem_id, desk_scale=getattr(args, "desk_scale", False)),
                              file_data, flags)


def problem_for(cfg: RunConfig) -> ControlProblem:
    problem, _ = build(cfg.problem)
    if cfg.scheme.T is not None and cfg.scheme.T != problem.T:
        problem = problem.with_horizon(cfg.scheme.T)
    return problem


def _output_dir(args, command: str, tag: Dict[str, Any]) -> str:
    if getattr(args, "out", None):
        return args.out
    return os.path.join(config.OUTPUT_ROOT, f"{command}-{config_hash(tag)[:12]}")


# --- terminal functions, probes and points ---

def parse_g_spec(spec: str, sensor_points: np.ndarray) -> TerminalCondition:
    """'|x|', '|x|^2', 'a + b*|x|^2', 'b*|x|^2', or a file of sensor values (one per line)."""
    text = spec.strip()
    if text == "|x|":
        return TerminalCondition.norm(sensor_points)
    if text == "|x|^2":
        return TerminalCondition.squared_norm(sensor_points)
    m = _QUADRATIC.match(text)
    if m:
        a = float(m.group("a")) if m.group("a") is not None else 0.0
        b = float(m.group("b"))
        if m.group("sign") == "-":
            b = -b
        return TerminalCondition.quadratic(a, b, sensor_points)
    if os.path.isfile(text):
        values = np.loadtxt(text, comments="#", ndmin=1, dtype=float)
        return TerminalCondition.from_sensor_values(sensor_points, values, label=os.path.basename(text))
    raise ConfigError(f"malformed terminal function '{spec}'", context={"field": "g_spec"})


def parse_floats(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got '{text}'")


def read_points(path: str, d: int) -> Tuple[np.ndarray, np.ndarray]:
    """(t, x) from a CSV with columns x0..x{d-1} and optional t; an empty file gives no points."""
    if os.path.getsize(path) == 0:
        return np.zeros(0), np.zeros((0, d))
    try:
        df = read_csv(path)
    except pd.errors.EmptyDataError:
        return np.zeros(0), np.zeros((0, d))
    cols = [f"x{i}" for i in range(d)]
    missing = [c for c in cols if c not in df.columns]
    if missing:
        raise ConfigError(f"points file {path} lacks columns {missing}", context={"path": path})
    try:
        x = df[cols].to_numpy(dtype=float).reshape(-1, d)
        t = df["t"].to_numpy(dtype=float) if "t" in df.columns else np.zeros(x.shape[0])
    except ValueError as e:
        raise ConfigError(f"points file {path} holds non-numeric values: {e}", context={"path": path}) from e
    return t, x


def grid_spec(problem: ControlProblem, h: float, T: float) -> GridSpec:
    """Grid over the problem box; a spacing that does not tile the box is a config error."""
    try:
        return GridSpec(lo=problem.box_lo.tolist(), hi=problem.box_hi.tolist(), h=h, T=T)
    except ValidationError as e:
        raise ConfigError(f"invalid grid spacing {h}: {e.errors()[0]['msg']}",
                          context={"field": "grid_h", "h": h}) from e


def probe_points(problem: ControlProblem, args, h: float) -> np.ndarray:
    """Probe states: a points file, the fixed-x[1] probe line, or seeded draws inside the box."""
    if getattr(args, "probes", None):
        return read_points(args.probes, problem.d)[1]
    if getattr(args, "probe_line", False):
        if problem.d < 2:
            raise ConfigError("the probe line needs d >= 2")
        line = VEHICLE_PROBE_LINE
        x = np.zeros((line["count"], problem.d))
        x[:, 0] = np.linspace(line["lo"], line["hi"], line["count"])
        x[:, line["fixed_axis"]] = line["fixed_value"]
        return x
    margin = config.GRID_BOUNDARY_MARGIN * h
    rng = np.random.default_rng(args.seed if getattr(args, "seed", None) is not None else 0)
    return rng.uniform(problem.box_lo + margin, problem.box_hi - margin, size=(args.n_probes, problem.d))


# --- run directories ---

def open_run(run_dir: str) -> Tuple[RunConfig, IterationLedger, Dict[str, Any]]:
    """Rebuild the ledger of a train or grid-solve directory from its manifest."""
    manifest_path = os.path.join(run_dir, "manifest.json")
    if not os.path.exists(manifest_path):
        raise ConfigError(f"{run_dir} is not a run directory (no manifest.json)", context={"run_dir": run_dir})
    with open(manifest_path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    cfg = validate_run_config(manifest["config"])
    problem = problem_for(cfg)
    net, g_set = prepare_run(problem, cfg)
    if manifest.get("kind") == "grid":
        g = parse_g_spec(manifest["g_spec"], net.sensor_points)
        fields = [GridField.load_slab(os.path.join(run_dir, f"grid_{n}.npz")) for n in range(int(manifest["M"]))]
        ledger = IterationLedger.from_grid_fields(problem, g, fields, InitialPolicy(problem), N=cfg.scheme.N)
    else:
        ledger = IterationLedger.load(run_dir, problem, g_set, InitialPolicy(problem))
    return cfg, ledger, manifest


def run_sensor_points(ledger: IterationLedger) -> np.ndarray:
    if ledger.operator is not None:
        return ledger.operator.sensor_points
    return ledger.g_set[0].sensor_points


def _default_g_spec(ledger: IterationLedger) -> TerminalCondition:
    return ledger.g_set[0]


# --- commands ---

def cmd_train(args) -> str:
    cfg = resolve_run_config(args)
    problem = problem_for(cfg)
    echo = cfg.model_dump(mode="json", exclude={"output_dir"})
    out = cfg.output_dir or _output_dir(args, "train", echo)
    workspace = RunWorkspace(out, echo)
    ledger = run_policy_iteration(problem, None, cfg)
    ledger.save(workspace)

    workspace.write_csv("diagnostics.csv", epsilon_report(ledger, cfg.diagnostics.include_m1))
    if len(ledger) >= 2:
        rng = np.random.default_rng(cfg.training.seed)
        probes = problem.sample_states(rng, cfg.diagnostics.monotonicity_probes)
        times = rng.uniform(0.0, ledger.horizon, size=probes.shape[0])
        workspace.write_csv("monotonicity.csv", monotonicity_check(ledger, probes, times))
        residual_trend_check(ledger)
    logger.info("--- Train run written to %s ---", out)
    return out


def cmd_infer(args) -> str:
    cfg, ledger, manifest = open_run(args.run_dir)
    if ledger.operator is None:
        raise ConfigError(f"{args.run_dir} holds no trained operator", context={"run_dir": args.run_dir})
    g = parse_g_spec(args.g_spec, ledger.operator.sensor_points)
    t, x = read_points(args.points, ledger.problem.d)

    steps_before = AdamState.total_steps
    values = final_value_handle(ledger).value(t, x, g) if x.shape[0] else np.zeros(0)
    if AdamState.total_steps != steps_before:
        raise SolverError("optimizer stepped during inference")

    data = {"t": t}
    for i in range(ledger.problem.d):
        data[f"x{i}"] = x[:, i]
    data["value"] = np.asarray(values, dtype=float).reshape(-1)
    echo = {"command": "infer", "run_config_sha256": manifest.get("config_sha256"), "g_spec": args.g_spec,
            "points": os.path.abspath(args.points)}
    workspace = RunWorkspace(_output_dir(args, "infer", echo), echo)
    workspace.write_csv("values.csv", pd.DataFrame(data))
    workspace.write_manifest({"g": g.label})
    return workspace.root


def cmd_synthesize(args) -> str:
    cfg, ledger, manifest = open_run(args.run_dir)
    g = parse_g_spec(args.g_spec, run_sensor_points(ledger)) if args.g_spec else _default_g_spec(ledger)
    x0 = np.asarray(parse_floats(args.x0), dtype=float)
    if x0.shape != (ledger.problem.d,):
        raise ConfigError(f"x0 has {x0.size} components, the problem has d={ledger.problem.d}",
                          context={"field": "x0"})
    solution = synthesize_trajectory(ledger, g, x0, args.dt, cfg.argmin)

    echo = {"command": "synthesize", "run_config_sha256": manifest.get("config_sha256"), "g_spec": g.label,
            "x0": x0.tolist(), "dt": args.dt}
    workspace = RunWorkspace(_output_dir(args, "synthesize", echo), echo)
    frame = solution.to_frame()
    workspace.write_csv("trajectory.csv", frame, warnings=solution.warnings)
    values = value_along(ledger, g, solution)
    workspace.write_csv("value.csv", values, warnings=solution.warnings)
    series = [c for c in frame.columns if c.startswith("x") or c.startswith("u")]
    plot_columns(frame, "t_k", series, workspace.root, "trajectory")
    plot_columns(values, "t_k", ["value"], workspace.root, "value")
    workspace.write_manifest({"objective": solution.objective, "warnings": solution.warnings})
    return workspace.root


def _oracle_values(problem: ControlProblem, g: TerminalCondition, oracle: str, probes: np.ndarray, T: float,
                   cfg: RunConfig, grid_h: float) -> np.ndarray:
    if oracle == "hopflax":
        if not problem.steering or g.params.get("kind") != "norm":
            raise OracleInapplicable("the Hopf-Lax oracle covers the unit-speed vehicle with g = |x| only",
                                     context={"problem": problem.name, "g": g.label})
        return hopf_lax_vehicle(0.0, probes, T)
    if oracle == "grid":
        if problem.d > 2:
            raise OracleInapplicable(f"dense grids need d <= 2, problem has d={problem.d}",
                                     context={"problem": problem.name})
        spec = grid_spec(problem, grid_h, T)
        fields = grid_policy_iteration(problem, g, spec, cfg.scheme.N, max(cfg.scheme.M, 1), cfg.argmin)
        return fields[-1].interpolate(0.0, probes)
    if oracle == "transcription":
        out = np.empty(probes.shape[0])
        for i, x0 in enumerate(probes):
            tp = TranscriptionProblem(problem, g, x0, cfg.transcription.steps, T)
            out[i] = transcribe_and_solve(tp, cfg.transcription).objective
        return out
    raise ConfigError(f"unknown oracle '{oracle}'", context={"field": "oracle"})


def _comparison_frame(probes: np.ndarray, v_hat: np.ndarray, v_oracle: np.ndarray) -> pd.DataFrame:
    err = np.abs(v_hat - v_oracle)
    data: Dict[str, Any] = {"kind": ["probe"] * probes.shape[0]}
    for i in range(probes.shape[1]):
        data[f"x{i}"] = probes[:, i]
    data.update({"v_hat": v_hat, "v_oracle": v_oracle, "abs_error": err})
    frame = pd.DataFrame(data)
    summary = pd.DataFrame([
        {"kind": "max", "abs_error": float(err.max()) if err.size else np.nan},
        {"kind": "mean", "abs_error": float(err.mean()) if err.size else np.nan},
    ])
    return pd.concat([frame, summary], ignore_index=True)[frame.columns]


def cmd_compare(args) -> str:
    cfg, ledger, manifest = open_run(args.run_dir)
    problem = ledger.problem
    g = parse_g_spec(args.g_spec, run_sensor_points(ledger)) if args.g_spec else _default_g_spec(ledger)
    grid_h = args.grid_h if args.grid_h is not None else ledger.h
    probes = probe_points(problem, args, grid_h)
    v_oracle = _oracle_values(problem, g, args.oracle, probes, ledger.horizon, cfg, grid_h)
    v_hat = np.asarray(final_value_handle(ledger).value(np.zeros(probes.shape[0]), probes, g), dtype=float)

    echo = {"command": "compare", "run_config_sha256": manifest.get("config_sha256"), "oracle": args.oracle,
            "g_spec": g.label, "grid_h": grid_h, "probes": probes.tolist()}
    workspace = RunWorkspace(_output_dir(args, "compare", echo), echo)
    frame = _comparison_frame(probes, v_hat, v_oracle)
    workspace.write_csv("compare.csv", frame)
    workspace.write_manifest({"max_abs_error": float(np.max(np.abs(v_hat - v_oracle))) if probes.size else None})
    logger.info("--- Compare vs %s: max error %.4g over %d probes ---", args.oracle,
                float(np.max(np.abs(v_hat - v_oracle))) if probes.size else float("nan"), probes.shape[0])
    return workspace.root


def cmd_grid_solve(args) -> str:
    cfg = resolve_run_config(args)
    problem = problem_for(cfg)
    if problem.d > 2:
        raise OracleInapplicable(f"dense grids need d <= 2, problem has d={problem.d}",
                                 context={"problem": problem.name})
    net, g_set = prepare_run(problem, cfg)
    g = parse_g_spec(args.g_spec, net.sensor_points) if args.g_spec else g_set[0]
    h = args.grid_h if args.grid_h is not None else cfg.scheme.h
    spec = grid_spec(problem, h, problem.T)
    fields = grid_policy_iteration(problem, g, spec, cfg.scheme.N, cfg.scheme.M, cfg.argmin)

    echo = cfg.model_dump(mode="json", exclude={"output_dir"})
    out = cfg.output_dir or _output_dir(args, "grid-solve", {"config": echo, "g": g.label, "h": h})
    workspace = RunWorkspace(out, echo)
    for n, f in enumerate(fields):
        f.save_slab(workspace.claim(f"grid_{n}.npz"))
    if fields:
        final = fields[-1]
        nodes = final.nodes().reshape(-1, problem.d)
        data = {f"x{i}": nodes[:, i] for i in range(problem.d)}
        data["value"] = final.values[0].ravel()
        workspace.write_csv("value_t0.csv", pd.DataFrame(data))
        ledger = IterationLedger.from_grid_fields(problem, g, fields, InitialPolicy(problem), N=cfg.scheme.N)
        if len(ledger) >= 2:
            workspace.write_csv("monotonicity.csv", monotonicity_check(ledger, nodes))
    workspace.write_manifest({"kind": "grid", "g_spec": args.g_spec or _g_spec_text(g), "M": len(fields),
                              "h": h, "N": cfg.scheme.N, "T": problem.T})
    return workspace.root


def _g_spec_text(g: TerminalCondition) -> str:
    kind = g.params.get("kind")
    if kind == "norm":
        return "|x|"
    if kind == "squared_norm":
        return "|x|^2"
    if kind == "quadratic":
        return f"{g.params['a']!r} + {g.params['b']!r}*|x|^2"
    raise ConfigError(f"terminal function '{g.label}' has no text form")


def cmd_oracle(args) -> str:
    cfg = resolve_run_config(args)
    problem = problem_for(cfg)
    net, g_set = prepare_run(problem, cfg)
    g = parse_g_spec(args.g_spec, net.sensor_points) if args.g_spec else g_set[0]
    grid_h = args.grid_h if args.grid_h is not None else cfg.scheme.h
    probes = probe_points(problem, args, grid_h)
    values = _oracle_values(problem, g, args.oracle, probes, problem.T, cfg, grid_h)

    echo = {"command": "oracle", "config": cfg.model_dump(mode="json"), "oracle": args.oracle, "g_spec": g.label,
            "probes": probes.tolist()}
    workspace = RunWorkspace(_output_dir(args, "oracle", echo), echo)
    data = {f"x{i}": probes[:, i] for i in range(problem.d)}
    data["value"] = values
    workspace.write_csv("oracle.csv", pd.DataFrame(data))
    workspace.write_manifest()
    return workspace.root


def cmd_catalog(args) -> str:
    listing = catalog_listing()
    if getattr(args, "out", None):
        workspace = RunWorkspace(args.out, {"command": "catalog"})
        workspace.write_csv("catalog.csv", listing)
        return workspace.root
    print(listing.to_string(index=False))
    return ""


COMMANDS = {
    "train": cmd_train,
    "infer": cmd_infer,
    "synthesize": cmd_synthesize,
    "compare": cmd_compare,
    "grid-solve": cmd_grid_solve,
    "oracle": cmd_oracle,
    "catalog": cmd_catalog,
}
