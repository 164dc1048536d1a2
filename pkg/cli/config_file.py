"""
Run configuration files.

One `dotted.key = value` per line; `#` starts a comment, blank lines are ignored, and
values are JSON literals (numbers, "strings", true/false, null, [lists]).
"""

import copy
import json
from typing import Any, Dict, Optional

from hjb.errors import ConfigError
from hjb.models import RunConfig, validate_run_config


def _strip_comment(line: str) -> str:
    in_string = False
    for i, ch in enumerate(line):
        if ch == '"' and (i == 0 or line[i - 1] != "\\"):
            in_string = not in_string
        elif ch == "#" and not in_string:
            return line[:i]
    return line


def parse_config_text(text: str, source: str = "<config>") -> Dict[str, Any]:
    """Nested dict from the key-value text; syntax errors name the line."""
    out: Dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'", context={"line": lineno})
        key, _, value = line.partition("=")
        key = key.strip()
        if not key or any(not part.isidentifier() for part in key.split(".")):
            raise ConfigError(f"{source}:{lineno}: malformed key '{key}'", context={"line": lineno})
        try:
            parsed = json.loads(value.strip())
        except json.JSONDecodeError:
            raise ConfigError(f"{source}:{lineno}: value for '{key}' is not a JSON literal",
                              context={"line": lineno, "field": key})
        set_dotted(out, key, parsed)
    return out


def set_dotted(target: Dict[str, Any], key: str, value: Any) -> None:
    parts = key.split(".")
    node = target
    for part in parts[:-1]:
        child = node.setdefault(part, {})
        if not isinstance(child, dict):
            raise ConfigError(f"'{key}' nests under a non-section value", context={"field": key})
        node = child
    node[parts[-1]] = value


def merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    """Deep merge; override wins on leaves."""
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def read_config_file(path: str) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}", context={"path": path})
    return parse_config_text(text, source=path)


def layered_run_config(defaults: Dict[str, Any], *layers: Optional[Dict[str, Any]]) -> RunConfig:
    """Later layers win; the result is validated once, before any compute."""
    data = copy.deepcopy(defaults)
    for layer in layers:
        data = merge(data, layer or {})
    return validate_run_config(data)
