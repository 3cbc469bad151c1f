"""Experiment configuration: schema, validation, presets and flag overrides.

A configuration is a JSON object.  Top-level keys ``seed``, ``out`` and
``format`` are shared by every command; the remaining keys are sections
whose fields are listed in :data:`SCHEMA`.  Unknown keys are rejected
before any work starts.
"""
from __future__ import annotations

import copy
import json
import math
from pathlib import Path
from typing import Any

from .synth import DoubleLogModel, DoublePowerModel, LogCurveModel, PowerCurveModel, PropagatorModel

__all__ = ["ConfigError", "SCHEMA", "PRESETS", "default_config", "load_config", "apply_override", "validate", "make_model"]


class ConfigError(ValueError):
    pass


_NUM = (int, float)
_LIST = list

# section -> field -> (accepted types, default)
SCHEMA: dict[str, dict[str, tuple]] = {
    "population": {
        "n_orders": (int, 10_000),
        "days": (int, 5_000),
        "symbols": (_LIST, ["S0", "S1", "S2", "S3", "S4", "S5", "S6", "S7", "S8", "S9"]),
        "eta_law": (_LIST, [-0.864, 1e-4, 0.3]),
        "f_law": (_LIST, [-0.932, 3 / 390, 1.0]),
        "herding_p_same": (_NUM, 0.55),
        "profile": (str, "flat"),
        "daily_volume": (_NUM, 1e7),
        "first_day": (str, "2008-01-02"),
    },
    "model": {
        "preset": ((str, type(None)), "critical-propagator"),
        "kind": ((str, type(None)), None),
        "params": (dict, {}),
    },
    "market": {
        "noise_scale": (_NUM, 1.0),
        "base_sigma": (_NUM, 0.02),
        "start_price": (_NUM, 50.0),
    },
    "filters": {
        "whitelist": ((str, type(None)), None),
        "latest_end": (_NUM, 961),
        "min_duration_minutes": (_NUM, 2),
        "max_eta": (_NUM, 0.3),
    },
    "input": {
        "metaorders": ((str, type(None)), None),
        "bars": ((str, type(None)), None),
        "dataset": ((str, type(None)), None),
    },
    "estimation": {
        "n_bins": (int, 50),
        "families": (_LIST, ["power", "log"]),
        "surface_family": (str, "double_power"),
        "n_eta_bins": (int, 10),
        "n_f_bins": (int, 10),
        "window": (int, 5),
        "horizon_multiple": (_NUM, 3.0),
        "cross_day": (bool, False),
        "eta_edges": ((_LIST, type(None)), None),
        "f_edges": ((_LIST, type(None)), None),
        "aggregate": (bool, True),
        "duration_bins": (_LIST, [0, 10, 25, 50, 100, 200, 390]),
        "n_points": (int, 50),
    },
    "simulate": {
        "model": (str, "propagator"),
        "delta": (_NUM, 0.5),
        "gamma": (_NUM, 0.5),
        "alpha": (_NUM, 0.0),
        "eta": (_NUM, 1.0),
        "durations": (_LIST, [0.25, 0.5, 0.75, 1.0]),
        "step": (_NUM, 1e-3),
        "noise_scale": (_NUM, 0.0),
        "horizon_multiple": (_NUM, 2.0),
        "n_paths": (int, 1),
        "a": (_NUM, 1.0),
        "sigma": (_NUM, 1.0),
        "lambdas": (_LIST, [0.0, 0.1, 0.5, 1.0]),
        "horizon_t": (_NUM, 1.0),
    },
    "book": {
        "y_norm": (_NUM, 1.0),
        "b": (_NUM, math.log(466.0)),
        "n": (_NUM, 0.0),
        "pi_min": (_NUM, 1e-6),
        "pi_max": (_NUM, 0.5),
        "n_points": (int, 100),
        "families": (_LIST, ["book_n0", "book_n1", "book_n"]),
        "n_bins": (int, 1000),
    },
}

TOP_LEVEL = {"seed": (int, 0), "out": (str, "out"), "format": (str, "csv")}

# Generator presets built from fitted values reported in the source study.
# They drive synthetic data only; none of them is data.
PRESETS: dict[str, dict[str, Any]] = {
    "critical-propagator": {"kind": "propagator", "params": {"delta": 0.5, "gamma": 0.5, "alpha": 0.0}},
    "front-loaded-propagator": {"kind": "propagator", "params": {"delta": 0.5, "gamma": 0.5, "alpha": 4.0}},
    "paper-power-curve": {"kind": "power", "params": {"y_coef": 0.15, "delta": 0.47}},
    "paper-log-curve": {"kind": "log", "params": {"a": 0.028, "b": 465.0}},
    "paper-double-power": {"kind": "double_power", "params": {"y_coef": 0.207, "delta": 0.52, "gamma1": 0.54}},
    "paper-double-log": {"kind": "double_log", "params": {"a": 0.035, "b": 60.0, "c": 61.0}},
}

_MODELS = {
    "propagator": PropagatorModel,
    "power": PowerCurveModel,
    "log": LogCurveModel,
    "double_power": DoublePowerModel,
    "double_log": DoubleLogModel,
}


def default_config() -> dict:
    cfg = {k: v[1] for k, v in TOP_LEVEL.items()}
    for sec, fields in SCHEMA.items():
        cfg[sec] = {k: copy.deepcopy(v[1]) for k, v in fields.items()}
    return cfg


def _check_type(where: str, value, types) -> None:
    types = types if isinstance(types, tuple) else (types,)
    if bool in types and isinstance(value, bool):
        return
    if isinstance(value, bool) and bool not in types:
        raise ConfigError(f"{where}: expected {'/'.join(t.__name__ for t in types)}, got a boolean")
    if float in types and isinstance(value, int):
        return
    if not isinstance(value, types):
        raise ConfigError(f"{where}: expected {'/'.join(t.__name__ for t in types)}, got {type(value).__name__}")


def validate(cfg: dict) -> dict:
    """Check keys and types; return the config merged over the defaults."""
    if not isinstance(cfg, dict):
        raise ConfigError("configuration must be a JSON object")
    out = default_config()
    for key, value in cfg.items():
        if key in TOP_LEVEL:
            _check_type(key, value, TOP_LEVEL[key][0])
            out[key] = value
        elif key in SCHEMA:
            if not isinstance(value, dict):
                raise ConfigError(f"{key}: expected an object")
            for sub, v in value.items():
                if sub not in SCHEMA[key]:
                    raise ConfigError(f"unknown key {key}.{sub}")
                _check_type(f"{key}.{sub}", v, SCHEMA[key][sub][0])
                out[key][sub] = v
        else:
            raise ConfigError(f"unknown key {key}")
    if out["format"] not in ("csv", "json"):
        raise ConfigError("format must be csv or json")
    model = out["model"]
    if model["kind"] is None and model["preset"] is None:
        raise ConfigError("model needs a preset or a kind")
    if model["preset"] is not None and model["preset"] not in PRESETS:
        raise ConfigError(f"unknown preset {model['preset']!r}; choose from {sorted(PRESETS)}")
    if model["kind"] is not None and model["kind"] not in _MODELS:
        raise ConfigError(f"unknown model kind {model['kind']!r}; choose from {sorted(_MODELS)}")
    return out


def load_config(path) -> dict:
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return raw


def apply_override(raw: dict, assignment: str) -> dict:
    """Apply ``section.key=value`` (value parsed as JSON, else taken as a string)."""
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} must look like section.key=value")
    path, text = assignment.split("=", 1)
    try:
        value = json.loads(text)
    except json.JSONDecodeError:
        value = text
    parts = path.split(".")
    if len(parts) == 1:
        raw[parts[0]] = value
    elif len(parts) == 2:
        raw.setdefault(parts[0], {})
        if not isinstance(raw[parts[0]], dict):
            raise ConfigError(f"{parts[0]} is not a section")
        raw[parts[0]][parts[1]] = value
    else:
        raise ConfigError(f"override path {path!r} is too deep")
    return raw


def make_model(model_cfg: dict):
    """Impact model for a validated ``model`` section; explicit params override the preset's."""
    kind = model_cfg["kind"]
    params: dict = {}
    if model_cfg["preset"] is not None:
        preset = PRESETS[model_cfg["preset"]]
        if kind is None or kind == preset["kind"]:
            kind = preset["kind"]
            params.update(preset["params"])
    params.update(model_cfg["params"])
    try:
        return _MODELS[kind](**params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for model {kind!r}: {exc}") from None
