"""Run configuration files.

A run is described by one JSON object.  Keys are validated per command and
unknown keys are rejected, so a typo cannot silently fall back to a default.
Example (``sweep``)::

    {"preset": "fiber", "K_values": [0.01, 2, 4, 10], "steps": 200, "format": "both"}
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .analysis import N_RATIOS, log_K_grid
from .grid import FrequencyGrid, GridError, make_grid
from .propagator import DEFAULT_STEPS, FACTORIZED, FIBER, PumpModel

PRESETS = {"fiber": FIBER, "factorized": FACTORIZED}
FORMATS = ("csv", "json", "both")

_PUMP_KEYS = {"preset", "K", "inv_delta1", "inv_delta2"}
_RUN_KEYS = {"grid", "steps", "auto_refine", "format", "threads"}
ALLOWED_KEYS = {
    "propagate": _PUMP_KEYS | _RUN_KEYS,
    "modes": _PUMP_KEYS | _RUN_KEYS | {"kernels", "truncation", "appendix_floor"},
    "sweep": (_PUMP_KEYS - {"K"}) | _RUN_KEYS | {"K_values", "K_range", "n_ratios"},
    "su11": {"zeta", "eta", "x", "stages", "stage_counts", "format"},
}


class ConfigError(ValueError):
    """Invalid or incomplete run configuration."""


@dataclass
class RunConfig:
    command: str
    raw: dict
    preset: str | None = None
    K: float | None = None
    inv_delta1: float | None = None
    inv_delta2: float | None = None
    grid: FrequencyGrid | None = None
    steps: int = DEFAULT_STEPS
    auto_refine: bool = True
    format: str = "csv"
    threads: int = 1
    K_values: list = field(default_factory=list)
    n_ratios: int = N_RATIOS
    kernels: str | None = None
    truncation: float = 1e-8
    appendix_floor: float = 0.1
    zeta: complex | None = None
    eta: float | None = None
    x: float | None = None
    stages: list | None = None
    stage_counts: list = field(default_factory=lambda: [10, 100, 1000])

    def pump(self, K: float | None = None) -> PumpModel:
        K = self.K if K is None else K
        if K is None:
            raise ConfigError("missing required field 'K'")
        return PumpModel(float(K), self.inv_delta1, self.inv_delta2)

    @property
    def ratio_figure(self) -> str:
        """Name of the ``r_k/r_1`` table: ``fig8`` for the factorized design."""
        return "fig8" if (self.inv_delta1, self.inv_delta2) == FACTORIZED else "fig6"


def parse_grid(text: str) -> FrequencyGrid:
    """``MIN:MAX:N`` to a grid."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"grid must look like MIN:MAX:N, got {text!r}")
    try:
        return make_grid(float(parts[0]), float(parts[1]), int(parts[2]))
    except (ValueError, GridError) as exc:
        raise ConfigError(f"bad grid {text!r}: {exc}") from exc


def _number(raw: dict, key: str, *, integer: bool = False, minimum: float | None = None):
    v = raw[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"field '{key}' must be a number, got {v!r}")
    if integer and not float(v).is_integer():
        raise ConfigError(f"field '{key}' must be an integer, got {v!r}")
    if not math.isfinite(v):
        raise ConfigError(f"field '{key}' must be finite")
    if minimum is not None and v < minimum:
        raise ConfigError(f"field '{key}' must be >= {minimum}, got {v!r}")
    return int(v) if integer else float(v)


def _complex(v, key: str) -> complex:
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return complex(v)
    if isinstance(v, list) and len(v) == 2 and all(isinstance(c, (int, float)) for c in v):
        return complex(v[0], v[1])
    raise ConfigError(f"field '{key}' must be a number or a [re, im] pair, got {v!r}")


def _grid(v) -> FrequencyGrid:
    if isinstance(v, str):
        return parse_grid(v)
    if isinstance(v, dict) and set(v) == {"min", "max", "n"}:
        try:
            return make_grid(float(v["min"]), float(v["max"]), int(v["n"]))
        except (TypeError, ValueError, GridError) as exc:
            raise ConfigError(f"bad grid {v!r}: {exc}") from exc
    raise ConfigError(f"field 'grid' must be 'MIN:MAX:N' or {{min, max, n}}, got {v!r}")


def build_config(command: str, raw: dict) -> RunConfig:
    """Validate a raw mapping for ``command``."""
    if command not in ALLOWED_KEYS:
        raise ConfigError(f"unknown command {command!r}")
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a JSON object")
    unknown = sorted(set(raw) - ALLOWED_KEYS[command])
    if unknown:
        raise ConfigError(f"unknown field(s) for '{command}': {', '.join(unknown)}")
    cfg = RunConfig(command=command, raw=dict(raw))

    if command == "su11":
        return _su11(cfg, raw)

    preset = raw.get("preset")
    if preset is not None and preset not in PRESETS:
        raise ConfigError(f"field 'preset' must be one of {sorted(PRESETS)}, got {preset!r}")
    cfg.preset = preset
    d1, d2 = PRESETS[preset] if preset else (None, None)
    cfg.inv_delta1 = _number(raw, "inv_delta1") if "inv_delta1" in raw else d1
    cfg.inv_delta2 = _number(raw, "inv_delta2") if "inv_delta2" in raw else d2
    needs_pump = not (command == "modes" and raw.get("kernels"))
    if needs_pump and (cfg.inv_delta1 is None or cfg.inv_delta2 is None):
        raise ConfigError("missing required field 'inv_delta1'/'inv_delta2' (or 'preset')")

    if "K" in raw:
        cfg.K = _number(raw, "K", minimum=0)
    elif command == "propagate" or (command == "modes" and needs_pump):
        raise ConfigError("missing required field 'K'")
    if "grid" in raw:
        cfg.grid = _grid(raw["grid"])
    if "steps" in raw:
        cfg.steps = _number(raw, "steps", integer=True, minimum=1)
    if "auto_refine" in raw:
        if not isinstance(raw["auto_refine"], bool):
            raise ConfigError("field 'auto_refine' must be true or false")
        cfg.auto_refine = raw["auto_refine"]
    if "format" in raw:
        cfg.format = raw["format"]
    if cfg.format not in FORMATS:
        raise ConfigError(f"field 'format' must be one of {FORMATS}, got {cfg.format!r}")
    if "threads" in raw:
        cfg.threads = _number(raw, "threads", integer=True, minimum=1)

    if command == "modes":
        if "kernels" in raw:
            if not isinstance(raw["kernels"], str):
                raise ConfigError("field 'kernels' must be a path")
            cfg.kernels = raw["kernels"]
        if "truncation" in raw:
            cfg.truncation = _number(raw, "truncation", minimum=0)
        if "appendix_floor" in raw:
            cfg.appendix_floor = _number(raw, "appendix_floor", minimum=0)

    if command == "sweep":
        if "K_values" in raw and "K_range" in raw:
            raise ConfigError("give either 'K_values' or 'K_range', not both")
        if "K_values" in raw:
            ks = raw["K_values"]
            if not isinstance(ks, list):
                raise ConfigError("field 'K_values' must be a list")
            cfg.K_values = [_number({"K_values": k}, "K_values", minimum=0) for k in ks]
            if not cfg.K_values:
                raise ConfigError("field 'K_values' is empty")
        elif "K_range" in raw:
            r = raw["K_range"]
            if not (isinstance(r, dict) and set(r) == {"min", "max", "n"}):
                raise ConfigError("field 'K_range' must be {min, max, n} (log-spaced)")
            lo = _number(r, "min", minimum=0)
            hi = _number(r, "max", minimum=0)
            n = _number(r, "n", integer=True, minimum=1)
            if not 0 < lo <= hi:
                raise ConfigError("field 'K_range' needs 0 < min <= max")
            cfg.K_values = log_K_grid(lo, hi, n)
        else:
            cfg.K_values = log_K_grid()
        if "n_ratios" in raw:
            cfg.n_ratios = _number(raw, "n_ratios", integer=True, minimum=2)
    return cfg


def _su11(cfg: RunConfig, raw: dict) -> RunConfig:
    if "format" in raw:
        cfg.format = raw["format"]
        if cfg.format not in FORMATS:
            raise ConfigError(f"field 'format' must be one of {FORMATS}, got {cfg.format!r}")
    if "zeta" in raw:
        cfg.zeta = _complex(raw["zeta"], "zeta")
    if "eta" in raw:
        cfg.eta = _number(raw, "eta")
    if "x" in raw:
        cfg.x = _number(raw, "x", minimum=0)
    if "stages" in raw:
        stages = raw["stages"]
        if not isinstance(stages, list) or not stages:
            raise ConfigError("field 'stages' must be a non-empty list of {g, theta}")
        cfg.stages = []
        for i, st in enumerate(stages):
            if not isinstance(st, dict) or "g" not in st or set(st) - {"g", "theta"}:
                raise ConfigError(f"stage {i} must be an object with 'g' and optional 'theta'")
            theta = _number(st, "theta") if "theta" in st else 0.0
            cfg.stages.append((_complex(st["g"], f"stages[{i}].g"), theta))
    if "stage_counts" in raw:
        counts = raw["stage_counts"]
        if not isinstance(counts, list) or not counts:
            raise ConfigError("field 'stage_counts' must be a non-empty list")
        cfg.stage_counts = [_number({"stage_counts": c}, "stage_counts", integer=True, minimum=1) for c in counts]
    return cfg


def load_config(path: str | Path, command: str) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return build_config(command, raw)
