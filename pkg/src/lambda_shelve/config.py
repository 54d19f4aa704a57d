"""Run configuration: flat ``key = value`` files (or JSON) plus flag overrides."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from .errors import InvalidParameters, LambdaShelveError
from .model import SystemParams


class ParseError(LambdaShelveError):
    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


class ValidationError(LambdaShelveError):
    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


PARAM_KEYS = ("omega1", "omega2", "delta1", "delta2", "gamma1", "gamma2")
SPACINGS = ("log", "linear")
FORMATS = ("csv", "json")

# key -> (type, default)
SCHEMA = {
    "omega1": (float, 0.0),
    "omega2": (float, 0.0),
    "delta1": (float, 0.0),
    "delta2": (float, 0.0),
    "gamma1": (float, 1.0),
    "gamma2": (float, 0.0),
    # simulate / compare
    "k0": (int, 1),
    "n": (int, None),
    "horizon": (float, None),
    "seed": (int, 0),
    "theta": (float, None),
    "ks_samples": (int, 20000),
    # density
    "t_min": (float, 0.0),
    "t_max": (float, 100.0),
    "points": (int, 200),
    "spacing": (str, "log"),
    # scan
    "scan_param": (str, "delta2"),
    "scan_min": (float, None),
    "scan_max": (float, None),
    "scan_steps": (int, 20),
    "scan_spacing": (str, "linear"),
    # output
    "out": (str, None),
    "format": (str, "csv"),
    "plot": (str, None),
    "summary": (str, None),
}


@dataclass(frozen=True)
class RunConfig:
    params: SystemParams
    k0: int = 1
    n: int | None = None
    horizon: float | None = None
    seed: int = 0
    theta: float | None = None
    ks_samples: int = 20000
    t_min: float = 0.0
    t_max: float = 100.0
    points: int = 200
    spacing: str = "log"
    scan_param: str = "delta2"
    scan_min: float | None = None
    scan_max: float | None = None
    scan_steps: int = 20
    scan_spacing: str = "linear"
    out: str | None = None
    format: str = "csv"
    plot: str | None = None
    summary: str | None = None


def _convert(key, raw, line=None):
    kind = SCHEMA[key][0]
    if raw is None:
        return None
    if isinstance(raw, str):
        raw = raw.strip()
        if raw == "" or raw.lower() == "none":
            return None
    try:
        if kind is int:
            value = float(raw)
            if not value.is_integer():
                raise ValueError
            return int(value)
        if kind is float:
            return float(raw)
        return str(raw)
    except (TypeError, ValueError):
        if line is not None:
            raise ParseError(line, f"{key}: expected {kind.__name__}, got {raw!r}") from None
        raise ValidationError(key, f"expected {kind.__name__}, got {raw!r}") from None


def parse_text(text: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ParseError(lineno, f"expected 'key = value', got {body!r}")
        key, raw = (part.strip() for part in body.split("=", 1))
        if key not in SCHEMA:
            raise ParseError(lineno, f"unknown key {key!r}")
        if key in values:
            raise ParseError(lineno, f"duplicate key {key!r}")
        values[key] = _convert(key, raw, lineno)
    return values


def parse_json(text: str) -> dict:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.lineno, exc.msg) from None
    if not isinstance(data, dict):
        raise ParseError(1, "top level must be an object")
    unknown = sorted(set(data) - set(SCHEMA))
    if unknown:
        raise ValidationError(unknown[0], "unknown key")
    return {k: _convert(k, v) for k, v in data.items()}


def load_file(path) -> dict:
    path = Path(path)
    text = path.read_text()
    return parse_json(text) if path.suffix.lower() == ".json" else parse_text(text)


def parse_config(text: str | None = None, flags: dict | None = None, *, path=None,
                 json_input: bool = False) -> RunConfig:
    """Build a validated :class:`RunConfig`.

    Precedence: flags (non-``None`` entries) over file/text values over
    defaults.
    """
    values = {}
    if path is not None:
        values.update(load_file(path))
    if text is not None:
        values.update(parse_json(text) if json_input else parse_text(text))
    for key, raw in (flags or {}).items():
        if raw is None:
            continue
        if key not in SCHEMA:
            raise ValidationError(key, "unknown key")
        values[key] = _convert(key, raw)
    merged = {key: values.get(key, default) for key, (_, default) in SCHEMA.items()}
    return validate(merged)


def validate(merged: dict) -> RunConfig:
    try:
        params = SystemParams(**{k: merged[k] for k in PARAM_KEYS})
    except InvalidParameters as exc:
        raise ValidationError(exc.field, str(exc).split(": ", 1)[-1]) from None

    def require(cond, key, message):
        if not cond:
            raise ValidationError(key, message)

    require(merged["k0"] in (1, 2), "k0", "must be 1 or 2")
    require(merged["n"] is None or merged["n"] >= 1, "n", "must be >= 1")
    h = merged["horizon"]
    require(h is None or (math.isfinite(h) and h > 0), "horizon", "must be > 0")
    require(merged["seed"] >= 0, "seed", "must be >= 0")
    th = merged["theta"]
    require(th is None or (math.isfinite(th) and th > 0), "theta", "must be > 0")
    require(merged["ks_samples"] >= 2, "ks_samples", "must be >= 2")
    require(merged["t_min"] >= 0, "t_min", "must be >= 0")
    require(merged["t_max"] > merged["t_min"], "t_max", "must exceed t_min")
    require(merged["points"] >= 2, "points", "grid needs at least 2 points")
    require(merged["spacing"] in SPACINGS, "spacing", f"must be one of {SPACINGS}")
    require(merged["scan_param"] in PARAM_KEYS, "scan_param", f"must be one of {PARAM_KEYS}")
    require(merged["scan_steps"] >= 2, "scan_steps", "must be >= 2")
    require(merged["scan_spacing"] in SPACINGS, "scan_spacing", f"must be one of {SPACINGS}")
    lo, hi = merged["scan_min"], merged["scan_max"]
    require(lo is None or hi is None or hi > lo, "scan_max", "must exceed scan_min")
    if merged["scan_spacing"] == "log":
        require(lo is None or lo > 0, "scan_min", "log spacing needs scan_min > 0")
    require(merged["format"] in FORMATS, "format", f"must be one of {FORMATS}")
    rest = {k: v for k, v in merged.items() if k not in PARAM_KEYS}
    return RunConfig(params=params, **rest)
