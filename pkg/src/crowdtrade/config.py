"""Scenario files: TOML parsing, dotted-path overrides, validation.

A scenario bundles everything a run needs: model parameters, the initial
cross-sectional distribution, the solver grid, the simulation settings, a
mode selecting which model applies, and an output directory.  Parsing
problems raise ConfigError; coherent-but-invalid scenarios raise
ValidationError with one message per violated rule.  The CLI maps these to
distinct exit codes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .model import (
    InitialDistribution,
    ModelParams,
    TimeGrid,
    validate,
    validate_initial,
)
from .simulator import SimConfig

MODES = ("single", "shared", "separate")

_MODEL_REQUIRED = ("sigma", "eta", "beta", "rho", "b", "k", "alpha", "horizon_T")
_MODEL_DEFAULTS = {"mu": 0.0, "gamma": 0.0, "gamma_bar": 0.0, "k_bar": 0.0}
_INITIAL_DEFAULTS = {
    "mean_Q0": 0.0,
    "var_Q0": 0.0,
    "mean_V0": 0.0,
    "var_V0": 0.0,
    "cov_Q0V0": 0.0,
    "S0": 100.0,
}
_SIM_DEFAULTS = {
    "n_agents": 1,
    "n_paths": 1,
    "seed": 0,
    "dt": 1e-3,
    "use_empirical_averages": True,
    "record_stride": 1,
}


class ConfigError(Exception):
    """The scenario file could not be read or does not have the right shape."""


class ValidationError(Exception):
    """The scenario parsed but violates model or simulation constraints."""

    def __init__(self, messages):
        self.messages = list(messages)
        super().__init__("; ".join(self.messages))


@dataclass(frozen=True)
class Scenario:
    mode: str
    params: ModelParams
    initial: InitialDistribution
    grid: TimeGrid
    sim: SimConfig
    outputs: Path = field(default_factory=lambda: Path("."))


def parse_override_value(text: str):
    """Interpret an override's right-hand side with TOML literal rules.

    Anything that fails to parse as a TOML value (an unquoted path, say)
    falls back to the raw string.
    """
    try:
        return tomllib.loads(f"value = {text}")["value"]
    except tomllib.TOMLDecodeError:
        return text


def apply_overrides(raw: dict, overrides) -> dict:
    """Apply dotted-path key=value pairs to a parsed scenario mapping."""
    for item in overrides:
        key, sep, value = item.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        node = raw
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {key!r} descends through a non-table")
        node[parts[-1]] = parse_override_value(value.strip())
    return raw


def _number(section: str, key: str, value) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{section}.{key} must be a number, got {value!r}")
    return float(value)


def _section(raw: dict, name: str) -> dict:
    got = raw.get(name, {})
    if not isinstance(got, dict):
        raise ConfigError(f"[{name}] must be a table")
    return dict(got)


def load_scenario(path, overrides=()) -> Scenario:
    """Read a scenario file, apply overrides, validate, and build a Scenario."""
    p = Path(path)
    try:
        with open(p, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse config {p}: {exc}") from exc
    raw = apply_overrides(raw, overrides)
    return scenario_from_mapping(raw)


def scenario_from_mapping(raw: dict) -> Scenario:
    """Build and validate a Scenario from a parsed mapping."""
    mode = raw.get("mode", "single")
    if mode not in MODES:
        raise ValidationError([f"mode must be one of {', '.join(MODES)}, got {mode!r}"])

    model_tbl = _section(raw, "model")
    problems = []
    missing = [key for key in _MODEL_REQUIRED if key not in model_tbl]
    if mode in ("shared", "separate"):
        # crowd modes must spell out the population couplings explicitly
        missing += [key for key in ("gamma_bar", "k_bar") if key not in model_tbl]
    if missing:
        raise ValidationError(
            [f"model.{key} is required for mode {mode!r}" for key in missing]
        )
    model_kwargs = {}
    for key in (*_MODEL_REQUIRED, *_MODEL_DEFAULTS):
        value = model_tbl.get(key, _MODEL_DEFAULTS.get(key))
        model_kwargs[key] = _number("model", key, value)
    unknown = set(model_tbl) - set(model_kwargs)
    if unknown:
        raise ConfigError(f"unknown model keys: {', '.join(sorted(unknown))}")
    params = ModelParams(**model_kwargs)
    problems += validate(params)

    init_tbl = _section(raw, "initial")
    unknown = set(init_tbl) - set(_INITIAL_DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown initial keys: {', '.join(sorted(unknown))}")
    init_kwargs = {
        key: _number("initial", key, init_tbl.get(key, default))
        for key, default in _INITIAL_DEFAULTS.items()
    }
    initial = InitialDistribution(**init_kwargs)
    problems += validate_initial(initial)

    grid_tbl = _section(raw, "grid")
    n_steps = grid_tbl.get("n_steps", 10_000)
    if isinstance(n_steps, bool) or not isinstance(n_steps, int):
        raise ConfigError(f"grid.n_steps must be an integer, got {n_steps!r}")
    if n_steps < 2:
        problems.append("grid.n_steps must be at least 2")

    sim_tbl = _section(raw, "simulation")
    unknown = set(sim_tbl) - set(_SIM_DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown simulation keys: {', '.join(sorted(unknown))}")
    sim_kwargs = dict(_SIM_DEFAULTS)
    sim_kwargs.update(sim_tbl)
    for key in ("n_agents", "n_paths", "seed", "record_stride"):
        if isinstance(sim_kwargs[key], bool) or not isinstance(sim_kwargs[key], int):
            raise ConfigError(f"simulation.{key} must be an integer")
    sim_kwargs["dt"] = _number("simulation", "dt", sim_kwargs["dt"])
    if not isinstance(sim_kwargs["use_empirical_averages"], bool):
        raise ConfigError("simulation.use_empirical_averages must be a boolean")

    if problems:
        raise ValidationError(problems)

    try:
        sim = SimConfig(**sim_kwargs)
        sim.steps_for(params.horizon_T)
    except ValueError as exc:
        raise ValidationError([str(exc)]) from exc

    outputs = raw.get("outputs", ".")
    if not isinstance(outputs, str):
        raise ConfigError(f"outputs must be a string path, got {outputs!r}")

    return Scenario(
        mode=mode,
        params=params,
        initial=initial,
        grid=TimeGrid(params.horizon_T, n_steps),
        sim=sim,
        outputs=Path(outputs),
    )
