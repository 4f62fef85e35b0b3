"""Run configuration for the command-line front end.

A configuration is a flat set of keys.  Values are resolved in increasing
priority from built-in defaults, per-command defaults, a JSON config file,
``POINTER_COLLAPSE_<KEY>`` environment variables and command-line flags.
Unknown keys in a config file are rejected, and validation reports every
violated constraint at once.

A JSON run summary written by the CLI embeds its resolved configuration
under ``"config"``; such a summary is accepted as a config file, which
re-runs the same computation.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .dynamics import ModelParams
from .ensemble import symmetric_grid
from .integrate import IntegratorConfig
from .noise import NoiseConfig, NoiseMode

__all__ = ["RunConfig", "ConfigError", "ENV_PREFIX", "COMMAND_DEFAULTS", "resolve_config", "load_config_file"]

ENV_PREFIX = "POINTER_COLLAPSE_"
FIG2_B0 = (1.0, 2.0, 5.0, 7.0, 10.0, 50.0, 100.0)


class ConfigError(ValueError):
    """Invalid, unknown or missing configuration keys."""

    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = list(problems)


@dataclass
class RunConfig:
    # model
    j: float = 1.0
    b0: float = 1.0
    n_spins: int = 100
    epsilon: float = 0.01
    hbar: float = 1.0
    # noise
    noise_mode: str = "per_step"
    tau_r: float = 0.0
    seed: int = 0
    # integrator
    dt: float = 1e-3
    max_steps: int = 8000
    delta_theta: float = 1e-3
    substeps: int = 1
    record_stride: int = 0
    # ensemble
    trials: int = 1000
    threads: int = 1
    grid_points: int = 11
    theta0_grid: list | None = None
    backend: str | None = None
    # single trajectory
    theta0: float | None = None
    phi0: float = 0.0
    # born curve
    b0_values: list = field(default_factory=lambda: list(FIG2_B0))
    # calibration
    bracket: list | None = None
    rel_tol: float = 0.01
    # stability bound
    tau_u: float = 4.4e17
    # flow diagram
    theta_count: int = 512
    chi_count: int = 9
    # output
    out: str = "."

    # --- derived objects -------------------------------------------------
    def model(self) -> ModelParams:
        return ModelParams(j_coupling=self.j, b0=self.b0, n_spins=self.n_spins, epsilon=self.epsilon, hbar=self.hbar)

    def noise(self) -> NoiseConfig:
        return NoiseConfig(mode=NoiseMode(self.noise_mode), tau_r=self.tau_r, seed=self.seed)

    def integrator(self) -> IntegratorConfig:
        return IntegratorConfig(
            dt=self.dt, max_steps=self.max_steps, delta_theta=self.delta_theta,
            record_stride=self.record_stride, substeps=self.substeps,
        )

    def grid(self) -> np.ndarray:
        if self.theta0_grid is not None:
            return np.asarray(self.theta0_grid, dtype=float)
        return symmetric_grid(self.grid_points)

    # --- validation ------------------------------------------------------
    def violations(self, required: tuple[str, ...] = ()) -> list[str]:
        out = [f"missing required key {k!r}" for k in required if getattr(self, k) is None]
        checks = (
            (ModelParams, self.model),
            (NoiseConfig, self.noise),
            (IntegratorConfig, self.integrator),
        )
        for _cls, build in checks:
            try:
                build()
            except ValueError as exc:
                out.extend(str(exc).split("; "))
        if not self.trials >= 1:
            out.append("trials must be >= 1")
        if not self.threads >= 1:
            out.append("threads must be >= 1")
        if not self.grid_points >= 1:
            out.append("grid_points must be >= 1")
        if self.theta0_grid is not None:
            g = np.asarray(self.theta0_grid, dtype=float)
            if g.ndim != 1 or g.size == 0 or np.any((g < 0) | (g > math.pi)):
                out.append("theta0_grid must be a nonempty list of angles in [0, pi]")
        if self.theta0 is not None and not 0.0 <= self.theta0 <= math.pi:
            out.append("theta0 must lie in [0, pi]")
        if not self.b0_values or any(not (v >= 0 and math.isfinite(v)) for v in self.b0_values):
            out.append("b0_values must be a nonempty list of nonnegative numbers")
        if self.bracket is not None and not (len(self.bracket) == 2 and 0 < self.bracket[0] < self.bracket[1]):
            out.append("bracket must be [lo, hi] with 0 < lo < hi")
        if not 0 < self.rel_tol < 1:
            out.append("rel_tol must lie in (0, 1)")
        if not (self.tau_u > 0 and math.isfinite(self.tau_u)):
            out.append("tau_u must be > 0")
        if self.theta_count < 2:
            out.append("theta_count must be >= 2")
        if self.chi_count < 1:
            out.append("chi_count must be >= 1")
        if self.backend not in (None, "compiled", "python"):
            out.append("backend must be 'compiled' or 'python'")
        return out

    def validate(self, required: tuple[str, ...] = ()) -> "RunConfig":
        problems = self.violations(required)
        if problems:
            raise ConfigError(problems)
        return self

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


KEYS = {f.name: f for f in fields(RunConfig)}
_INT_KEYS = {"n_spins", "seed", "max_steps", "substeps", "record_stride", "trials", "threads",
             "grid_points", "theta_count", "chi_count"}
_LIST_KEYS = {"theta0_grid", "b0_values", "bracket"}
_STR_KEYS = {"noise_mode", "backend", "out"}

# defaults that differ between subcommands; flags, env and files override them
COMMAND_DEFAULTS: dict[str, dict[str, Any]] = {
    "flow-diagram": {},
    "simulate": {"record_stride": 1},
    "ensemble": {},
    # per-step noise needs a long step (10 collapse times) to resolve the
    # Born curve at B0 = J; substeps keep RK4 stable at large B0
    "born-curve": {"dt": 10.0, "substeps": 0, "trials": 10000, "max_steps": 8000, "noise_mode": "per_step"},
    "calibrate": {"noise_mode": "poisson_resample", "substeps": 0, "trials": 2000},
    "stability-bound": {},
}

REQUIRED: dict[str, tuple[str, ...]] = {
    "simulate": ("theta0",),
}


def _coerce(key: str, value: Any) -> Any:
    """Convert a raw value (JSON scalar or string) to the key's type."""
    if value is None:
        return None
    if key in _LIST_KEYS:
        if isinstance(value, str):
            value = [v for v in value.split(",") if v.strip()]
        return [float(v) for v in value]
    if key in _STR_KEYS:
        return str(value)
    if key in _INT_KEYS:
        if isinstance(value, float) and not value.is_integer():
            raise ValueError(f"{key} must be an integer")
        return int(value)
    return float(value)


def load_config_file(path: str | Path) -> dict[str, Any]:
    """Read a JSON config (or a run summary with an embedded ``config``)."""
    data = json.loads(Path(path).read_text())
    if not isinstance(data, dict):
        raise ConfigError([f"{path}: top level must be an object"])
    if "config" in data and isinstance(data["config"], dict):
        data = data["config"]
    return data


def env_overrides(environ: Mapping[str, str] | None = None) -> dict[str, str]:
    environ = os.environ if environ is None else environ
    out = {}
    for key in KEYS:
        name = ENV_PREFIX + key.upper()
        if name in environ:
            out[key] = environ[name]
    return out


def resolve_config(
    command: str | None = None,
    file_values: Mapping[str, Any] | None = None,
    env: Mapping[str, Any] | None = None,
    flags: Mapping[str, Any] | None = None,
) -> RunConfig:
    """Merge the layers (later wins), reject unknown keys and validate."""
    merged: dict[str, Any] = {}
    problems: list[str] = []
    layers = (COMMAND_DEFAULTS.get(command or "", {}), file_values or {}, env or {}, flags or {})
    for layer in layers:
        for key, value in layer.items():
            if key not in KEYS:
                problems.append(f"unknown key {key!r}")
                continue
            try:
                merged[key] = _coerce(key, value)
            except (TypeError, ValueError):
                problems.append(f"bad value for {key!r}: {value!r}")
    if problems:
        raise ConfigError(problems)
    cfg = RunConfig(**merged)
    return cfg.validate(REQUIRED.get(command or "", ()))
