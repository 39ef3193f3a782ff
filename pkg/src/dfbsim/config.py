"""Run configuration files.

Plain text, one ``key = value [unit]`` per line, ``#`` starts a comment.
Values without a unit are taken as SI.  Example::

    structure = gdcc_qws
    current = 100 mA
    duration = 10 ns
    grating_period = 227.039 nm
    snapshot_times = 3 ns, 10 ns

A run manifest (``manifest.json``) is also accepted and reproduces the run
it describes.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import math
import re
from pathlib import Path

from .device import C_LIGHT, DeviceParams
from .engine import STRUCTURES, RunConfig

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1

_PREFIX = {"": 1.0, "k": 1e3, "m": 1e-3, "u": 1e-6, "µ": 1e-6, "n": 1e-9,
           "p": 1e-12, "f": 1e-15}

# dimension -> {unit string: SI factor}
UNITS = {
    "length": {p + "m": f for p, f in _PREFIX.items() if p != "k"},
    "time": {p + "s": f for p, f in _PREFIX.items() if p != "k"},
    "current": {p + "A": f for p, f in _PREFIX.items() if p != "k"},
    "angle": {"rad": 1.0, "deg": math.pi / 180},
    "density": {"m^-3": 1.0, "cm^-3": 1e6},
    "inv_length": {"m^-1": 1.0, "cm^-1": 1e2},
    "volume": {"m^3": 1.0, "um^3": 1e-18, "µm^3": 1e-18, "cm^3": 1e-6},
    "area": {"m^2": 1.0, "cm^2": 1e-4},
    "m4": {"m^4": 1.0},
    "b_coef": {"m^3/s": 1.0, "m^3s^-1": 1.0, "cm^3/s": 1e-6},
    "c_coef": {"m^6/s": 1.0, "m^6s^-1": 1.0, "cm^6/s": 1e-12},
    "velocity": {"m/s": 1.0},
    "none": {"": 1.0, "1": 1.0},
}

PARAM_DIMENSIONS = {
    "tau_carrier": "time", "b_radiative": "b_coef", "c_auger": "c_coef",
    "n_transparency": "density", "eps_compression": "volume",
    "a0_diff_gain": "area", "a1_curvature": "density", "a2_peak_shift": "m4",
    "alpha_loss": "inv_length", "n_group": "none", "cavity_length": "length",
    "active_thickness": "length", "active_width": "length",
    "active_volume": "volume", "grating_period": "length",
    "lambda_bragg": "length", "lambda_peak_transparency": "length",
    "confinement": "none", "phase_shift": "angle", "residue_phase_left": "angle",
    "dn_dN": "volume", "beta_sp": "none", "petermann_k": "none",
}

RUN_KEYS = {
    "structure": "str", "g_shape": "none", "kappa0L": "none",
    "current": "current", "duration": "time", "n_sections": "int",
    "carrier_subcycle": "int", "seed": "int", "snapshot_times": "time_list",
    "profile_interval": "time", "record_stride": "int", "lambda_ref": "length",
    "noise": "bool", "seed_field": "density", "initial_carriers": "density",
    "max_steps": "int", "max_wall_seconds": "time",
}

_LINE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*?)\s*$")
_QUANTITY = re.compile(r"^([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(\S*)$")


class ConfigError(ValueError):
    pass


def parse_quantity(text: str, dimension: str, where: str = "") -> float:
    """Convert ``"227.039 nm"`` to SI given the expected dimension."""
    m = _QUANTITY.match(text.strip())
    if not m:
        raise ConfigError(f"{where}cannot parse quantity {text!r}")
    value, unit = float(m.group(1)), m.group(2)
    table = UNITS[dimension]
    if unit == "":
        return value
    if unit not in table:
        raise ConfigError(f"{where}unit {unit!r} not valid for a {dimension} "
                          f"(expected one of {sorted(u for u in table if u)})")
    return value * table[unit]


def _convert(key, raw, kind, where):
    if kind == "str":
        return raw
    if kind == "int":
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"{where}{key} must be an integer, got {raw!r}") from None
    if kind == "bool":
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{where}{key} must be true/false, got {raw!r}")
    if kind == "time_list":
        return tuple(parse_quantity(x, "time", where) for x in raw.split(",") if x.strip())
    return parse_quantity(raw, kind, where)


def parse_text(text: str, source: str = "<config>") -> tuple[dict, dict]:
    """Split a text config into (run settings, parameter overrides), SI units."""
    run, overrides = {}, {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0]
        if not line.strip():
            continue
        where = f"{source}:{lineno}: "
        m = _LINE.match(line)
        if not m:
            raise ConfigError(f"{where}expected 'key = value [unit]'")
        key, raw = m.groups()
        if key in PARAM_DIMENSIONS:
            overrides[key] = parse_quantity(raw, PARAM_DIMENSIONS[key], where)
        elif key == "group_velocity":
            overrides[key] = parse_quantity(raw, "velocity", where)
        elif key in RUN_KEYS:
            run[key] = _convert(key, raw, RUN_KEYS[key], where)
        else:
            raise ConfigError(f"{where}unknown key {key!r}")
    return run, overrides


def _resolve_params(overrides: dict) -> DeviceParams:
    overrides = dict(overrides)
    vg = overrides.pop("group_velocity", None)
    params = DeviceParams().replace(**overrides)
    if vg is not None and not math.isclose(vg, C_LIGHT / params.n_group, rel_tol=1e-6):
        raise ConfigError("group_velocity is derived as c / n_group; set n_group instead")
    for key in PARAM_DIMENSIONS:
        if key not in overrides:
            log.debug("%s = %r (default)", key, getattr(params, key))
    return params


def build_run_config(run: dict, overrides: dict) -> RunConfig:
    if "structure" not in run:
        raise ConfigError("'structure' must be given explicitly "
                          f"({', '.join(sorted(STRUCTURES))} or custom)")
    try:
        params = _resolve_params(overrides)
        return RunConfig(params=params, **run)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def parse_config(path) -> RunConfig:
    """Load a text config or a run manifest into a fully resolved RunConfig."""
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json" or text.lstrip().startswith("{"):
        data = json.loads(text)
        return config_from_dict(data.get("config", data))
    run, overrides = parse_text(text, str(path))
    return build_run_config(run, overrides)


def config_to_dict(cfg: RunConfig) -> dict:
    """JSON-safe, SI-unit form of a RunConfig; floats round-trip exactly."""
    d = {f.name: getattr(cfg, f.name) for f in dataclasses.fields(cfg) if f.name != "params"}
    d["snapshot_times"] = list(cfg.snapshot_times)
    d["params"] = cfg.params.as_dict()
    return d


def config_from_dict(d: dict) -> RunConfig:
    d = dict(d)
    params = d.pop("params", {})
    unknown = set(d) - set(RUN_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    unknown = set(params) - set(PARAM_DIMENSIONS)
    if unknown:
        raise ConfigError(f"unknown parameter keys {sorted(unknown)}")
    if "snapshot_times" in d:
        d["snapshot_times"] = tuple(d["snapshot_times"])
    return build_run_config(d, params)


def param_overrides(params: DeviceParams) -> dict:
    """Parameters differing from the built-in defaults."""
    base = DeviceParams()
    return {k: v for k, v in params.as_dict().items() if getattr(base, k) != v}
