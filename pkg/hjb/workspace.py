import hashlib
import json
import logging
import os
from typing import Any, Dict, Iterable, Optional

import pandas as pd

from . import config
from .errors import ConfigError

logger = logging.getLogger(__name__)


def config_hash(payload: Dict[str, Any]) -> str:
    """sha256 of the canonical JSON form of a config echo."""
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def read_csv(path: str) -> pd.DataFrame:
    """Read a run CSV, skipping the trailing manifest and warning comment lines."""
    return pd.read_csv(path, comment="#", float_precision="round_trip")


def read_comment_lines(path: str) -> Dict[str, list]:
    out: Dict[str, list] = {"manifest": [], "warning": []}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("# manifest "):
                out["manifest"].append(line[len("# manifest "):].strip())
            elif line.startswith("# warning: "):
                out["warning"].append(line[len("# warning: "):].strip())
    return out


class RunWorkspace:
    """
    A write-once output directory for one command.
    Every file lands under `root`; existing files are never overwritten.
    """
    def __init__(self, root: str, config_echo: Optional[Dict[str, Any]] = None):
        if os.path.exists(os.path.join(root, "manifest.json")):
            raise ConfigError(f"{root} already holds a completed run", context={"path": root})
        self.root = root
        self.config_echo = config_echo or {}
        self.config_sha256 = config_hash(self.config_echo)
        os.makedirs(root, exist_ok=True)
        logger.info("--- Workspace initialized at %s ---", root)

    def path(self, name: str) -> str:
        return os.path.join(self.root, name)

    def _claim(self, name: str) -> str:
        path = self.path(name)
        if os.path.exists(path):
            raise ConfigError(f"refusing to overwrite existing output {path}", context={"path": path})
        return path

    def write_csv(self, name: str, df: pd.DataFrame, warnings: Iterable[str] = ()) -> str:
        """Header, rows, then '# manifest config_sha256=...' and any '# warning: ...' lines."""
        if not isinstance(df, pd.DataFrame):
            raise TypeError(f"Value written to workspace must be a pandas DataFrame, not {type(df)}")
        path = self._claim(name)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            df.to_csv(fh, index=False, float_format="%.17g", lineterminator="\n")
            fh.write(f"# manifest config_sha256={self.config_sha256}\n")
            for w in warnings:
                fh.write(f"# warning: {w}\n")
        logger.info("--- Workspace: wrote %s (%d rows) ---", name, len(df))
        return path

    def write_json(self, name: str, payload: Dict[str, Any]) -> str:
        path = self._claim(name)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True, default=str)
            fh.write("\n")
        return path

    def write_manifest(self, extra: Optional[Dict[str, Any]] = None) -> str:
        payload = {"config": self.config_echo, "config_sha256": self.config_sha256,
                   "code_version": config.CODE_VERSION}
        payload.update(extra or {})
        return self.write_json("manifest.json", payload)

    def claim(self, name: str) -> str:
        """Reserve a path for a binary artifact written by another module."""
        return self._claim(name)
