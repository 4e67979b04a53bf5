"""Scenario configuration: JSON schema, strict validation, unit conversion.

Config files carry ordinary frequencies in Hz (the loader multiplies by 2*pi)
and SI seconds/kelvin elsewhere; the in-memory objects are all rad/s.
Unknown keys are rejected so typos cannot silently change a run.
"""

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .integrator import IntegrationControl
from .linearized import validate_covariance
from .model import (
    CavityGeometry,
    DriveSpec,
    MeanFieldState,
    SystemParams,
    g_from_geometry,
    nbar_from_dimensionless_temperature,
)

TWO_PI = 2.0 * math.pi

SWEEP_VARIABLES = ("temperature_dimensionless", "nbar", "omega0")
MODELS = ("full", "rwa", "both")


class ConfigError(ValueError):
    """The scenario file is missing, malformed, or violates the schema."""


def _require_keys(block: dict, allowed: set, required: set, where: str):
    unknown = set(block) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {sorted(unknown)}")
    missing = required - set(block)
    if missing:
        raise ConfigError(f"missing key(s) in {where}: {sorted(missing)}")


def _number(block: dict, key: str, where: str, default=None):
    if key not in block:
        return default
    value = block[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}.{key} must be a number")
    return float(value)


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    values: tuple


@dataclass(frozen=True)
class ScenarioConfig:
    """Fully validated scenario: physical system, drive, init, run plan."""

    params: SystemParams
    drive: DriveSpec
    init_mean_mode: str  # "rest" | "periodic_orbit" | "explicit"
    init_mean: MeanFieldState | None
    init_cov: np.ndarray | None
    t_final: float
    model: str
    control: IntegrationControl
    sweep: SweepSpec | None


def _parse_system(block: dict) -> SystemParams:
    where = "system"
    allowed = {
        "omega_m_hz",
        "delta_c_hz",
        "g_hz",
        "geometry",
        "gamma_c_hz",
        "gamma_m_hz",
        "nbar_m",
        "temperature_dimensionless",
    }
    required = {"omega_m_hz", "delta_c_hz", "gamma_c_hz", "gamma_m_hz"}
    _require_keys(block, allowed, required, where)

    omega_m = TWO_PI * _number(block, "omega_m_hz", where)
    geometry = None
    if "geometry" in block:
        if "g_hz" in block:
            raise ConfigError("give either system.g_hz or system.geometry, not both")
        gblock = block["geometry"]
        _require_keys(
            gblock,
            {"omega_c_hz", "m_eff_kg", "cavity_length_m"},
            {"omega_c_hz", "m_eff_kg", "cavity_length_m"},
            "system.geometry",
        )
        geometry = CavityGeometry(
            omega_c=TWO_PI * _number(gblock, "omega_c_hz", "geometry"),
            m_eff=_number(gblock, "m_eff_kg", "geometry"),
            cavity_length=_number(gblock, "cavity_length_m", "geometry"),
        )
        g = g_from_geometry(geometry, omega_m)
    elif "g_hz" in block:
        g = TWO_PI * _number(block, "g_hz", where)
    else:
        raise ConfigError("system needs g_hz or a geometry block")

    if "nbar_m" in block and "temperature_dimensionless" in block:
        raise ConfigError("give either system.nbar_m or system.temperature_dimensionless")
    if "temperature_dimensionless" in block:
        nbar = nbar_from_dimensionless_temperature(
            _number(block, "temperature_dimensionless", where)
        )
    else:
        nbar = _number(block, "nbar_m", where, default=0.0)

    try:
        return SystemParams(
            omega_m=omega_m,
            delta_c=TWO_PI * _number(block, "delta_c_hz", where),
            g=g,
            gamma_c=TWO_PI * _number(block, "gamma_c_hz", where),
            gamma_m=TWO_PI * _number(block, "gamma_m_hz", where),
            nbar_m=nbar,
            geometry=geometry,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _parse_init(block: dict):
    _require_keys(block, {"mean_field", "covariance"}, set(), "init")
    mode = "rest"
    mean = None
    mf = block.get("mean_field", "rest")
    if isinstance(mf, str):
        if mf not in ("rest", "periodic_orbit"):
            raise ConfigError(f"init.mean_field string must be rest|periodic_orbit, got {mf!r}")
        mode = mf
    elif isinstance(mf, dict):
        _require_keys(mf, {"a_mean", "b_mean"}, {"a_mean", "b_mean"}, "init.mean_field")
        try:
            a = complex(float(mf["a_mean"][0]), float(mf["a_mean"][1]))
            b = complex(float(mf["b_mean"][0]), float(mf["b_mean"][1]))
        except (TypeError, IndexError, ValueError) as exc:
            raise ConfigError("init.mean_field entries must be [re, im] pairs") from exc
        mode, mean = "explicit", MeanFieldState(a, b)
    else:
        raise ConfigError("init.mean_field must be a string or an object")

    cov = None
    cv = block.get("covariance", "ground")
    if isinstance(cv, str):
        if cv != "ground":
            raise ConfigError(f"init.covariance string must be 'ground', got {cv!r}")
    else:
        try:
            cov = validate_covariance(np.array(cv, dtype=float))
        except Exception as exc:
            raise ConfigError(f"invalid init.covariance: {exc}") from exc
    return mode, mean, cov


def _parse_integration(block: dict) -> IntegrationControl:
    where = "run.integration"
    allowed = {"mode", "dt_s", "abs_tol", "rel_tol", "max_steps", "output_stride"}
    _require_keys(block, allowed, set(), where)
    kwargs = {}
    if "mode" in block:
        kwargs["mode"] = block["mode"]
    if "dt_s" in block:
        kwargs["dt"] = _number(block, "dt_s", where)
    for key in ("abs_tol", "rel_tol"):
        if key in block:
            kwargs[key] = _number(block, key, where)
    for key in ("max_steps", "output_stride"):
        if key in block:
            value = block[key]
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"{where}.{key} must be an integer")
            kwargs[key] = value
    try:
        return IntegrationControl(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {where}: {exc}") from exc


def _parse_sweep(block: dict) -> SweepSpec:
    _require_keys(block, {"variable", "values"}, {"variable", "values"}, "sweep")
    variable = block["variable"]
    if variable not in SWEEP_VARIABLES:
        raise ConfigError(f"sweep.variable must be one of {SWEEP_VARIABLES}, got {variable!r}")
    values = block["values"]
    if not isinstance(values, list) or not values:
        raise ConfigError("sweep.values must be a non-empty list")
    for v in values:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError("sweep.values must be numbers")
    return SweepSpec(variable=variable, values=tuple(float(v) for v in values))


def parse_scenario(data: dict) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ConfigError("top level of the scenario must be an object")
    _require_keys(data, {"system", "drive", "init", "run", "sweep"}, {"system", "drive", "run"}, "scenario")

    params = _parse_system(data["system"])

    drive_block = data["drive"]
    _require_keys(drive_block, {"omega0_hz"}, {"omega0_hz"}, "drive")
    omega0 = TWO_PI * _number(drive_block, "omega0_hz", "drive")
    if omega0 < 0:
        raise ConfigError("drive.omega0_hz must be >= 0")
    drive = DriveSpec.for_system(params, omega0)

    init_mode, init_mean, init_cov = _parse_init(data.get("init", {}))

    run = data["run"]
    _require_keys(run, {"t_final_s", "model", "integration"}, {"t_final_s"}, "run")
    t_final = _number(run, "t_final_s", "run")
    if not t_final > 0:
        raise ConfigError("run.t_final_s must be positive")
    model = run.get("model", "full")
    if model not in MODELS:
        raise ConfigError(f"run.model must be one of {MODELS}, got {model!r}")
    control = _parse_integration(run.get("integration", {}))

    sweep = _parse_sweep(data["sweep"]) if "sweep" in data else None

    return ScenarioConfig(
        params=params,
        drive=drive,
        init_mean_mode=init_mode,
        init_mean=init_mean,
        init_cov=init_cov,
        t_final=t_final,
        model=model,
        control=control,
        sweep=sweep,
    )


def load_scenario(path) -> ScenarioConfig:
    """Load and validate a scenario JSON file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_scenario(data)


def default_config_path(name: str = "default.json") -> Path:
    """Path of a bundled scenario file."""
    return Path(__file__).resolve().parent / "configs" / name
