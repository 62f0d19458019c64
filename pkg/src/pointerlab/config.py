"""Scenario files: INI text with an explicit unit on every physical quantity.

Example::

    [model]
    type = jcm
    g = 1.0 rad/t
    nbar = 100
    phi = 0.3 rad

    [grid]
    t_max = 0.25 t_R
    points = 200

    [analysis]
    run = scan, trajectory

Frequencies take ``rad/t``; angles ``rad`` or ``deg``; times ``t`` (absolute),
``1/g`` (multiples of the inverse coupling) or ``t_R`` (multiples of the
Jaynes-Cummings revival time).  Every section and key is whitelisted, and
anything unrecognized is rejected.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import InvalidArgumentError

MODEL_TYPES = ("jcm", "sbm", "spin-spin", "custom-hamiltonian")
ANALYSES = ("propagate", "scan", "trajectory", "bloch", "asymptote", "theorems", "schmidt")

_FREQ = "frequency"
_ANGLE = "angle"
_TIME = "time"
_INT = "integer"
_REAL = "real"
_TEXT = "text"
_LIST = "list"

_SCHEMA = {
    "model": {
        "type": _TEXT, "g": _FREQ, "g_phase": _ANGLE, "nbar": _REAL, "phi": _ANGLE,
        "n_trunc": _INT, "omega": _FREQ, "omega0": _FREQ, "delta0": _FREQ,
        "couplings": _LIST, "spins": _INT, "coupling_mean": _FREQ, "coupling_sigma": _FREQ,
        "hamiltonian": _TEXT, "picture": _TEXT, "energy_units": _TEXT,
    },
    "environment": {"kind": _TEXT, "n": _INT, "amplitude": _REAL, "amplitude_phase": _ANGLE,
                    "amplitudes": _TEXT},
    "system": {"state": _TEXT, "theta": _ANGLE, "chi": _ANGLE},
    "grid": {"t_max": _TIME, "points": _INT},
    "analysis": {"run": _LIST},
    "tolerances": {"scalar": _REAL, "theorem": _REAL, "settle": _REAL, "window_fraction": _REAL,
                   "polarization_floor": _REAL, "angle_deg": _REAL},
    "scan": {"resolution": _INT, "seeds": _INT, "threads": _TEXT},
    "run": {"seed": _INT},
}


class ConfigError(InvalidArgumentError):
    """The scenario file is malformed or inconsistent."""


def _split_unit(raw: str):
    parts = raw.split()
    if len(parts) == 1:
        return parts[0], None
    if len(parts) == 2:
        return parts[0], parts[1]
    raise ConfigError(f"cannot parse quantity {raw!r}")


def _number(text: str, key: str) -> float:
    try:
        x = float(text)
    except ValueError:
        raise ConfigError(f"{key}: {text!r} is not a number") from None
    if not math.isfinite(x):
        raise ConfigError(f"{key}: value must be finite")
    return x


def _parse_value(kind: str, raw: str, key: str):
    raw = raw.strip()
    if kind == _TEXT:
        return raw
    if kind == _LIST:
        return raw
    if kind == _INT:
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"{key}: {raw!r} is not an integer") from None
    if kind == _REAL:
        value, unit = _split_unit(raw)
        if unit is not None:
            raise ConfigError(f"{key} is dimensionless; drop the unit {unit!r}")
        return _number(value, key)
    value, unit = _split_unit(raw)
    x = _number(value, key)
    if unit is None:
        raise ConfigError(f"{key} needs an explicit unit")
    if kind == _FREQ:
        if unit != "rad/t":
            raise ConfigError(f"{key}: frequency unit must be rad/t, got {unit!r}")
        return x
    if kind == _ANGLE:
        if unit == "rad":
            return x
        if unit == "deg":
            return math.radians(x)
        raise ConfigError(f"{key}: angle unit must be rad or deg, got {unit!r}")
    if kind == _TIME:
        if unit not in ("t", "1/g", "t_R"):
            raise ConfigError(f"{key}: time unit must be t, 1/g or t_R, got {unit!r}")
        return (x, unit)
    raise AssertionError(kind)


@dataclass
class ScenarioConfig:
    source: str
    sections: dict = field(default_factory=dict)

    def get(self, section: str, key: str, default=None):
        return self.sections.get(section, {}).get(key, default)

    def require(self, section: str, key: str):
        value = self.get(section, key)
        if value is None:
            raise ConfigError(f"missing [{section}] {key}")
        return value

    @property
    def model_type(self) -> str:
        return self.require("model", "type")

    @property
    def analyses(self) -> list:
        raw = self.get("analysis", "run", "")
        return [a.strip() for a in raw.split(",") if a.strip()]

    def float_list(self, section: str, key: str) -> list:
        raw = self.get(section, key)
        if raw is None:
            return []
        raw = raw.strip()
        if not raw.endswith("rad/t"):
            raise ConfigError(f"[{section}] {key}: list needs the unit rad/t at the end")
        items = raw[: -len("rad/t")].strip().rstrip(",")
        return [_number(x.strip(), key) for x in items.split(",") if x.strip()]


def parse_config_text(text: str, source: str = "<string>") -> ScenarioConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    sections = {}
    for name in cp.sections():
        if name not in _SCHEMA:
            raise ConfigError(f"unknown section [{name}]")
        keys = {}
        for key, raw in cp.items(name):
            if key not in _SCHEMA[name]:
                raise ConfigError(f"unknown key {key!r} in [{name}]")
            keys[key] = _parse_value(_SCHEMA[name][key], raw, f"[{name}] {key}")
        sections[name] = keys
    cfg = ScenarioConfig(source, sections)
    _validate(cfg)
    return cfg


def load_config(path) -> ScenarioConfig:
    p = Path(path)
    if not p.is_file():
        bundled = Path(__file__).parent / "configs" / p.name
        if bundled.is_file():
            p = bundled
        else:
            raise ConfigError(f"config file {path!s} not found")
    return parse_config_text(p.read_text(), str(p))


def _validate(cfg: ScenarioConfig):
    if cfg.model_type not in MODEL_TYPES:
        raise ConfigError(f"unknown model {cfg.model_type!r}; choose from {', '.join(MODEL_TYPES)}")
    for a in cfg.analyses:
        if a not in ANALYSES:
            raise ConfigError(f"unknown analysis {a!r}")
    cfg.require("grid", "t_max")
    cfg.require("grid", "points")
    for key, value in cfg.sections.get("tolerances", {}).items():
        if value <= 0:
            raise ConfigError(f"tolerance {key} must be positive")
    t_max, unit = cfg.require("grid", "t_max")
    if t_max <= 0:
        raise ConfigError("t_max must be positive")
    if unit == "t_R" and cfg.model_type != "jcm":
        raise ConfigError("t_R units need the jcm model")
    if cfg.require("grid", "points") < 2:
        raise ConfigError("grid needs at least 2 points")


def complex_pairs(raw: str) -> list:
    """Parse ``"a0, b0; a1, b1"`` into a list of complex pairs.

    Amplitudes may be written as Python complex literals such as ``0.6+0.8j``.
    """
    out = []
    for chunk in raw.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = [p.strip() for p in chunk.split(",")]
        if len(parts) != 2:
            raise ConfigError(f"amplitude pair {chunk!r} needs exactly two entries")
        try:
            out.append((complex(parts[0]), complex(parts[1])))
        except ValueError:
            raise ConfigError(f"cannot parse amplitude pair {chunk!r}") from None
    return out


def npz_matrices(path: str, base: str):
    p = Path(path)
    if not p.is_absolute():
        p = Path(base).parent / p
    if not p.is_file():
        raise ConfigError(f"Hamiltonian file {p} not found")
    with np.load(p) as data:
        missing = {"H_S", "H_E", "H_prime"} - set(data.files)
        if missing:
            raise ConfigError(f"{p} lacks arrays {sorted(missing)}")
        return data["H_S"], data["H_E"], data["H_prime"]
