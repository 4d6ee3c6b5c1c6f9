"""Strict JSON run configuration.

A document looks like::

    {
      "params": {"mu": 1, "sigma_tilde": 1, "sigma_bar_1": 2, "sigma_bar_2": 3, "gamma": 1},
      "grid": {"nx": 64, "ny": 64, "order": 4},
      "stationary": {"samples": 101},
      "spectrum": {"k_max": 100, "oracle": true, "k_oracle": 8, "ny_oracle": 2048},
      "threshold": {"k_scan": 200, "tol": 1e-8},
      "evolve": {"t_end": 5.0, "dt": "auto", "stepper": "imex",
                 "perturbation": {"k": 1, "eps": 1e-3, "phase": "cos"},
                 "tracked_modes": [1], "record_every": 10, "burn_in": 0.1}
    }

Only ``params`` is required.  Unknown keys, wrong types and non-finite
numbers are rejected with a :class:`ConfigError` naming the field.
"""
from __future__ import annotations

import copy
import json
import math
from typing import Any

from .core import ModelParameters

PARAM_KEYS = ("mu", "sigma_tilde", "sigma_bar_1", "sigma_bar_2", "gamma")

DEFAULTS: dict = {
    "grid": {"nx": 64, "ny": 64, "order": 4},
    "stationary": {"samples": 101},
    "spectrum": {"k_max": 100, "oracle": True, "k_oracle": 8, "ny_oracle": 2048},
    "threshold": {"k_scan": 200, "tol": 1e-8},
    "evolve": {
        "t_end": 5.0,
        "dt": "auto",
        "stepper": "imex",
        "perturbation": {"k": 1, "eps": 1e-3, "phase": "cos"},
        "tracked_modes": [1],
        "record_every": 10,
        "burn_in": 0.1,
    },
}


class ConfigError(ValueError):
    """Invalid configuration document."""


def _reject_constant(name):
    raise ConfigError(f"non-finite number {name} is not allowed")


def _number(path: str, value, *, integer=False, positive=False, nonneg=False) -> Any:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(f"{path}: must be finite, got {value!r}")
    if integer:
        if isinstance(value, float) and not value.is_integer():
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        value = int(value)
    else:
        value = float(value)
    if positive and not value > 0:
        raise ConfigError(f"{path}: must be > 0, got {value!r}")
    if nonneg and value < 0:
        raise ConfigError(f"{path}: must be >= 0, got {value!r}")
    return value


def _merge(path: str, defaults: dict, given) -> dict:
    if not isinstance(given, dict):
        raise ConfigError(f"{path}: expected an object")
    out = copy.deepcopy(defaults)
    for key, value in given.items():
        if key not in defaults:
            raise ConfigError(f"{path}.{key}: unknown key {key!r}")
        if isinstance(defaults[key], dict):
            out[key] = _merge(f"{path}.{key}", defaults[key], value)
        else:
            out[key] = value
    return out


def resolve(doc) -> dict:
    """Apply defaults and validate; returns a plain, fully resolved dict."""
    if not isinstance(doc, dict):
        raise ConfigError("top level must be a JSON object")
    allowed = {"params", *DEFAULTS}
    for key in doc:
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} at top level")
    if "params" not in doc:
        raise ConfigError("missing required block 'params'")
    params = doc["params"]
    if not isinstance(params, dict):
        raise ConfigError("params: expected an object")
    for key in params:
        if key not in PARAM_KEYS:
            raise ConfigError(f"params.{key}: unknown key {key!r}")
    for key in PARAM_KEYS:
        if key not in params:
            raise ConfigError(f"params.{key}: missing")
    cfg = {"params": {k: _number(f"params.{k}", params[k]) for k in PARAM_KEYS}}
    for block, defaults in DEFAULTS.items():
        cfg[block] = _merge(block, defaults, doc.get(block, {}))

    g = cfg["grid"]
    g["nx"] = _number("grid.nx", g["nx"], integer=True)
    g["ny"] = _number("grid.ny", g["ny"], integer=True)
    g["order"] = _number("grid.order", g["order"], integer=True)
    if g["nx"] < 8 or g["nx"] % 2:
        raise ConfigError("grid.nx: must be an even integer >= 8")
    if g["ny"] < 8:
        raise ConfigError("grid.ny: must be >= 8")
    if g["order"] not in (2, 4):
        raise ConfigError("grid.order: must be 2 or 4")

    s = cfg["stationary"]
    s["samples"] = _number("stationary.samples", s["samples"], integer=True, positive=True)

    sp = cfg["spectrum"]
    sp["k_max"] = _number("spectrum.k_max", sp["k_max"], integer=True, nonneg=True)
    if not isinstance(sp["oracle"], bool):
        raise ConfigError("spectrum.oracle: expected true or false")
    sp["k_oracle"] = _number("spectrum.k_oracle", sp["k_oracle"], integer=True, nonneg=True)
    if sp["k_oracle"] > 16:
        raise ConfigError("spectrum.k_oracle: must be <= 16")
    sp["ny_oracle"] = _number("spectrum.ny_oracle", sp["ny_oracle"], integer=True)
    if sp["ny_oracle"] < 512 or sp["ny_oracle"] % 8:
        raise ConfigError("spectrum.ny_oracle: must be a multiple of 8 and >= 512")

    th = cfg["threshold"]
    th["k_scan"] = _number("threshold.k_scan", th["k_scan"], integer=True, positive=True)
    th["tol"] = _number("threshold.tol", th["tol"], positive=True)

    ev = cfg["evolve"]
    ev["t_end"] = _number("evolve.t_end", ev["t_end"], positive=True)
    if ev["dt"] != "auto":
        ev["dt"] = _number("evolve.dt", ev["dt"], positive=True)
    if ev["stepper"] not in ("imex", "rk4"):
        raise ConfigError("evolve.stepper: must be 'imex' or 'rk4'")
    pert = ev["perturbation"]
    kmax = g["nx"] // 2 - 1
    pert["k"] = _number("evolve.perturbation.k", pert["k"], integer=True, nonneg=True)
    pert["eps"] = _number("evolve.perturbation.eps", pert["eps"])
    if pert["k"] > kmax:
        raise ConfigError(f"evolve.perturbation.k: must be <= {kmax} for nx={g['nx']}")
    if pert["phase"] not in ("cos", "sin"):
        raise ConfigError("evolve.perturbation.phase: must be 'cos' or 'sin'")
    modes = ev["tracked_modes"]
    if not isinstance(modes, list) or not modes:
        raise ConfigError("evolve.tracked_modes: expected a non-empty list")
    ev["tracked_modes"] = [_number("evolve.tracked_modes[]", k, integer=True, positive=True) for k in modes]
    if len(set(ev["tracked_modes"])) != len(modes) or max(ev["tracked_modes"]) > kmax:
        raise ConfigError(f"evolve.tracked_modes: must be distinct values in 1..{kmax}")
    ev["record_every"] = _number("evolve.record_every", ev["record_every"], integer=True, positive=True)
    ev["burn_in"] = _number("evolve.burn_in", ev["burn_in"], nonneg=True)
    return cfg


def parse(text: str) -> dict:
    """Parse and resolve a JSON document given as text."""
    try:
        doc = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return resolve(doc)


def load_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    return parse(text)


def model_parameters(cfg: dict) -> ModelParameters:
    return ModelParameters(**cfg["params"])
