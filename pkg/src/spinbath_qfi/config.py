"""Run configuration: a TOML file with [model], [estimate], [time], [sweep], [output].

Every table and key is checked against a fixed schema before anything is
computed; unknown keys are errors.  See README.md for the full schema.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .model import ModelSpec
from .optimize import TimeWindow
from .qfi import DERIVATIVE_METHODS, PARAMETERS

SCHEMA = {
    "model": {
        "epsilon", "delta", "n_spins", "omega", "chi", "g",
        "temperature", "preparation", "chain_boundary",
    },
    "estimate": {"parameter", "derivative"},
    "time": {"t_min", "t_max", "n_grid"},
    "sweep": {"values", "start", "stop", "num"},
    "output": {"path", "format", "pipeline", "threads"},
}
FORMATS = ("csv", "json")
PIPELINE_CHOICES = {"corr": ("corr",), "uncorr": ("unc",), "both": ("corr", "unc")}


class ConfigError(ValueError):
    """Invalid or unknown configuration entry; the message names the field."""


@dataclass
class RunConfig:
    spec: ModelSpec = field(default_factory=ModelSpec)
    parameter: str = "temperature"
    derivative: str = "finite_difference"
    window: TimeWindow = field(default_factory=TimeWindow)
    sweep_values: list | None = None
    output_path: str | None = None
    output_format: str | None = None
    pipeline: str = "both"
    threads: int = 1

    @property
    def pipelines(self) -> tuple:
        return PIPELINE_CHOICES[self.pipeline]


def _check_keys(data: dict, allowed: set, where: str):
    for key in data:
        if key not in allowed:
            prefix = f"{where}." if where else ""
            raise ConfigError(f"{prefix}{key}: unknown key")


def _number(table, key, where, kind=float):
    value = table[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}.{key}: expected a number, got {value!r}")
    if kind is int:
        if int(value) != value:
            raise ConfigError(f"{where}.{key}: expected an integer, got {value!r}")
        return int(value)
    return float(value)


def parse_config(data: dict) -> RunConfig:
    """Validate a decoded TOML document and build a RunConfig."""
    _check_keys(data, set(SCHEMA), "")
    for name, table in data.items():
        if not isinstance(table, dict):
            raise ConfigError(f"{name}: expected a table")
        _check_keys(table, SCHEMA[name], name)

    model = dict(data.get("model", {}))
    for key in ("epsilon", "delta", "g", "temperature"):
        if key in model:
            model[key] = _number(model, key, "model")
    if "n_spins" in model:
        model["n_spins"] = _number(model, "n_spins", "model", int)
    for key in ("omega", "chi"):
        if key in model and isinstance(model[key], list):
            model[key] = tuple(model[key])
    if "preparation" in model:
        model["preparation"] = tuple(model["preparation"])
    try:
        spec = ModelSpec(**model)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"model.{exc}") from exc

    cfg = RunConfig(spec=spec)

    estimate = data.get("estimate", {})
    cfg.parameter = estimate.get("parameter", cfg.parameter)
    if cfg.parameter not in PARAMETERS:
        raise ConfigError(f"estimate.parameter: must be one of {PARAMETERS}, got {cfg.parameter!r}")
    cfg.derivative = estimate.get("derivative", cfg.derivative)
    if cfg.derivative not in DERIVATIVE_METHODS:
        raise ConfigError(
            f"estimate.derivative: must be one of {DERIVATIVE_METHODS}, got {cfg.derivative!r}"
        )

    time = data.get("time", {})
    window_args = {}
    for key in ("t_min", "t_max"):
        if key in time:
            window_args[key] = _number(time, key, "time")
    if "n_grid" in time:
        window_args["n_grid"] = _number(time, "n_grid", "time", int)
    try:
        cfg.window = TimeWindow(**window_args)
    except ValueError as exc:
        raise ConfigError(f"time.{exc}") from exc

    sweep = data.get("sweep")
    if sweep is not None:
        cfg.sweep_values = _sweep_values(sweep)

    output = data.get("output", {})
    cfg.output_path = output.get("path")
    cfg.output_format = output.get("format")
    if cfg.output_format is not None and cfg.output_format not in FORMATS:
        raise ConfigError(f"output.format: must be one of {FORMATS}, got {cfg.output_format!r}")
    cfg.pipeline = output.get("pipeline", cfg.pipeline)
    if cfg.pipeline not in PIPELINE_CHOICES:
        raise ConfigError(
            f"output.pipeline: must be one of {tuple(PIPELINE_CHOICES)}, got {cfg.pipeline!r}"
        )
    if "threads" in output:
        cfg.threads = _number(output, "threads", "output", int)
        if cfg.threads < 1:
            raise ConfigError(f"output.threads: must be >= 1, got {cfg.threads}")
    return cfg


def _sweep_values(sweep: dict) -> list:
    if "values" in sweep:
        if {"start", "stop", "num"} & set(sweep):
            raise ConfigError("sweep: give either values or start/stop/num, not both")
        values = sweep["values"]
        if not isinstance(values, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in values
        ):
            raise ConfigError("sweep.values: expected a list of numbers")
        values = [float(v) for v in values]
    else:
        missing = {"start", "stop", "num"} - set(sweep)
        if missing:
            raise ConfigError(f"sweep.{sorted(missing)[0]}: required when values is absent")
        num = _number(sweep, "num", "sweep", int)
        values = np.linspace(
            _number(sweep, "start", "sweep"), _number(sweep, "stop", "sweep"), num
        ).tolist()
    if len(values) < 2:
        raise ConfigError("sweep.values: need at least 2 values")
    return values


def load_config(path: str | Path) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc.strerror}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config: malformed TOML in {path}: {exc}") from exc
    return parse_config(data)
