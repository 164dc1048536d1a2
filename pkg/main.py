import argparse
import json
import logging
import sys
from typing import List, Optional

from hjb import config
from hjb.errors import ConfigError, SolverError
from cli.commands import COMMANDS

logger = logging.getLogger(__name__)


def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run configuration file (dotted.key = JSON value per line)")
    common.add_argument("--problem", help="built-in problem id; close misspellings are resolved")
    common.add_argument("--seed", type=int, default=None, help="seed for network init, sampling and probes")
    common.add_argument("--desk-scale", action="store_true", help="use the laptop-sized preset")
    common.add_argument("--out", help=f"output directory (default under {config.OUTPUT_ROOT})")
    common.add_argument("--threads", type=int, default=None, help="cap on worker threads")
    common.add_argument("--log-level", default=config.LOG_LEVEL, help="DEBUG, INFO, WARNING, ...")
    return common


def _probe_flags(p: argparse.ArgumentParser, default_probes: int) -> None:
    p.add_argument("--probes", help="CSV of probe states (columns x0..x{d-1})")
    p.add_argument("--probe-line", action="store_true", help="x[1] = -0.5, x[0] in [-1.5, 1.5], 50 probes")
    p.add_argument("--n-probes", type=int, default=default_probes, help="seeded random probes inside the box")
    p.add_argument("--grid-h", type=float, default=None, help="grid spacing for the grid oracle")


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags()
    parser = argparse.ArgumentParser(
        prog="main.py",
        description="HJB viscosity solutions by policy iteration with a physics-informed operator network.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("train", parents=[common], help="run policy iteration and write the ledger")

    p = sub.add_parser("infer", parents=[common], help="evaluate a trained operator on a new terminal function")
    p.add_argument("run_dir")
    p.add_argument("g_spec", help="'a + b*|x|^2', '|x|', '|x|^2' or a sensor-value file")
    p.add_argument("points", help="CSV with columns t (optional), x0..x{d-1}")

    p = sub.add_parser("synthesize", parents=[common], help="roll out the feedback control from x0")
    p.add_argument("run_dir")
    p.add_argument("--g-spec", default=None)
    p.add_argument("--x0", required=True, help="comma-separated initial state")
    p.add_argument("--dt", type=float, default=None, help="rollout step (default T/100)")

    p = sub.add_parser("compare", parents=[common], help="compare a run against an oracle")
    p.add_argument("run_dir")
    p.add_argument("--oracle", choices=["grid", "transcription", "hopflax"], required=True)
    p.add_argument("--g-spec", default=None)
    _probe_flags(p, 200)

    p = sub.add_parser("grid-solve", parents=[common], help="dense-grid policy iteration (d <= 2)")
    p.add_argument("--g-spec", default=None)
    p.add_argument("--grid-h", type=float, default=None)

    p = sub.add_parser("oracle", parents=[common], help="reference values without a trained run")
    p.add_argument("--oracle", choices=["grid", "transcription", "hopflax"], required=True)
    p.add_argument("--g-spec", default=None)
    _probe_flags(p, 10)

    sub.add_parser("catalog", parents=[common], help="list the built-in problems")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.INFO),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        result = COMMANDS[args.command](args)
    except SolverError as e:
        logger.error("--- %s failed: %s ---", args.command, e.message)
        print(json.dumps(e.to_record(), default=str), file=sys.stderr)
        return e.exit_code
    except OSError as e:
        err = ConfigError(str(e), context={"path": getattr(e, "filename", None)})
        print(json.dumps(err.to_record(), default=str), file=sys.stderr)
        return err.exit_code
    except ValueError as e:
        err = ConfigError(str(e), context={"command": args.command})
        logger.error("--- %s failed: %s ---", args.command, err.message)
        print(json.dumps(err.to_record(), default=str), file=sys.stderr)
        return err.exit_code
    if result:
        print(result)
    return 0


if __name__ == "__main__":
    sys.exit(main())
