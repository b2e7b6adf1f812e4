"""Experiment configuration: JSON schema, defaults and conversion to model records."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path

import jsonschema

from qmarket.errors import ConfigError
from qmarket.params import MarketInit, TraderParams, time_grid
from qmarket.reservoir_generated import Model3Params
from qmarket.reservoir_info import ReservoirSpecII, TabulatedDensity

SCHEMA_VERSION = 1
MODELS = ("model1", "model2", "model3", "pilotwave")
OBJECTIVES = ("delta_pi", "amplitude", "dominant_frequency", "ordering")

_num = {"type": "number"}
_nonneg = {"type": "number", "minimum": 0}
_pos = {"type": "number", "exclusiveMinimum": 0}
_pair = {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}
_density = {
    "oneOf": [
        _nonneg,
        {
            "type": "object",
            "properties": {
                "k": {"type": "array", "items": _num, "minItems": 2},
                "n": {"type": "array", "items": _nonneg, "minItems": 2},
            },
            "required": ["k", "n"],
            "additionalProperties": False,
        },
    ]
}
_init = {
    "type": "object",
    "properties": {
        "shares": {"type": "integer", "minimum": 0},
        "cash": {"type": "integer", "minimum": 0},
        "loi": {"type": "integer", "minimum": 0, "default": 0},
    },
    "required": ["shares", "cash"],
    "additionalProperties": False,
}


def _trader(props, required):
    props = dict(props, init=_init, name={"type": "string"})
    return {
        "type": "object",
        "properties": props,
        "required": [*required, "init"],
        "additionalProperties": False,
    }


TRADER_SCHEMAS = {
    "model1": _trader(
        {"omega_s": _nonneg, "omega_c": _nonneg, "Omega": _nonneg, "lambda_inf": _nonneg},
        ["omega_s", "omega_c", "Omega", "lambda_inf"],
    ),
    "model2": _trader(
        {
            "omega": _num,
            "Omega_slope": _pos,
            "lambda_inf": _nonneg,
            "n_density": dict(_density, default=0.0),
        },
        ["omega", "Omega_slope", "lambda_inf"],
    ),
    "model3": _trader(
        {
            "omega_s": _num,
            "omega_c": _num,
            "Omega": _num,
            "Omega_r_slope": _pos,
            "lambda_inf": _nonneg,
            "gamma": _nonneg,
            "n_r_density": dict(_density, default=0.0),
        },
        ["omega_s", "omega_c", "Omega", "Omega_r_slope", "lambda_inf", "gamma"],
    ),
}

PILOTWAVE_SCHEMA = {
    "type": "object",
    "properties": {
        "grid": {
            "type": "object",
            "properties": {
                "n1": {"type": "integer", "minimum": 4},
                "n2": {"type": "integer", "minimum": 4},
                "L1": _pos,
                "L2": _pos,
            },
            "required": ["n1", "n2", "L1", "L2"],
            "additionalProperties": False,
        },
        "hbar": dict(_pos, default=1.0),
        "mass": dict(_pos, default=1.0),
        "packet": {
            "type": "object",
            "properties": {
                "center": dict(_pair, default=[0.0, 0.0]),
                "sigma": {"type": "array", "items": _pos, "minItems": 2, "maxItems": 2},
                "kappa": dict(_pair, default=[0.0, 0.0]),
            },
            "required": ["sigma"],
            "additionalProperties": False,
        },
        "potential": {
            "type": "object",
            "properties": {
                "kind": {"enum": ["zero", "quadratic", "linear"]},
                "stiffness": dict(_pair, default=[0.0, 0.0]),
                "center": dict(_pair, default=[0.0, 0.0]),
                "slope": dict(_pair, default=[0.0, 0.0]),
            },
            "required": ["kind"],
            "additionalProperties": False,
            "default": {"kind": "zero"},
        },
        "dt": _pos,
        "n_steps": {"type": "integer", "minimum": 1},
        "save_every": {"type": "integer", "minimum": 1, "default": 1},
        "r_floor": {"oneOf": [_pos, {"type": "null"}], "default": None},
        "q_path": dict(_pair, default=[0.0, 0.0]),
        "pi0": dict(_pair, default=[0.0, 0.0]),
        "dump_fields": {"type": "boolean", "default": False},
    },
    "required": ["grid", "packet", "dt", "n_steps"],
    "additionalProperties": False,
}

BASE_SCHEMA = {
    "type": "object",
    "properties": {
        "schema": {"const": SCHEMA_VERSION},
        "model": {"enum": list(MODELS)},
        "traders": {"type": "array", "minItems": 1},
        "time": {
            "type": "object",
            "properties": {
                "t_max": _pos,
                "n_samples": {"type": "integer", "minimum": 2},
            },
            "required": ["t_max", "n_samples"],
            "additionalProperties": False,
        },
        "oracle": {
            "type": "object",
            "properties": {
                "k_min": _num,
                "k_max": _num,
                "n_k": {"type": "integer", "minimum": 100},
                "decay_times": {"oneOf": [_pos, {"type": "null"}], "default": None},
            },
            "additionalProperties": False,
            "default": {},
        },
        "model3": {
            "type": "object",
            "properties": {"noise_integral": {"type": "boolean", "default": True}},
            "additionalProperties": False,
            "default": {},
        },
        "pilotwave": PILOTWAVE_SCHEMA,
        "output": {
            "type": "object",
            "properties": {
                "dir": {"type": "string", "default": "."},
                "prefix": {"type": "string", "default": ""},
                "svg": {"type": "boolean", "default": True},
            },
            "additionalProperties": False,
            "default": {},
        },
    },
    "required": ["schema", "model"],
    "additionalProperties": False,
}

SWEEP_SCHEMA = {
    "type": "object",
    "properties": {
        "schema": {"const": SCHEMA_VERSION},
        "parameters": {
            "type": "array",
            "minItems": 1,
            "maxItems": 2,
            "items": {
                "type": "object",
                "properties": {
                    "name": {"type": "string"},
                    "min": _num,
                    "max": _num,
                    "steps": {"type": "integer", "minimum": 2},
                },
                "required": ["name", "min", "max", "steps"],
                "additionalProperties": False,
            },
        },
        "objective": {"enum": list(OBJECTIVES)},
        "output": {"type": "string"},
    },
    "required": ["schema", "parameters", "objective"],
    "additionalProperties": False,
}


def _fill_defaults(instance, schema):
    """Insert ``default`` values from ``schema`` into ``instance`` (in place)."""
    if not isinstance(instance, dict) or schema.get("type") != "object":
        return
    for key, sub in schema.get("properties", {}).items():
        if key not in instance and "default" in sub:
            instance[key] = copy.deepcopy(sub["default"])
        if key in instance:
            _fill_defaults(instance[key], sub)


_VALIDATORS: dict = {}


def _validator(schema):
    # building a validator checks the schema itself, which dominates small sweeps
    v = _VALIDATORS.get(id(schema))
    if v is None:
        cls = jsonschema.validators.validator_for(schema)
        cls.check_schema(schema)
        v = _VALIDATORS[id(schema)] = cls(schema)
    return v


def _validate(instance, schema, where):
    exc = jsonschema.exceptions.best_match(_validator(schema).iter_errors(instance))
    if exc is not None:
        path = ".".join(str(p) for p in exc.absolute_path)
        raise ConfigError(f"{where}{'.' + path if path else ''}: {exc.message}")


def validate_config(raw: dict) -> dict:
    """Schema-check a config and return a copy with every default filled in."""
    cfg = copy.deepcopy(raw)
    _validate(cfg, BASE_SCHEMA, "config")
    _fill_defaults(cfg, BASE_SCHEMA)
    model = cfg["model"]
    if model == "pilotwave":
        if "pilotwave" not in cfg:
            raise ConfigError("config: model 'pilotwave' needs a 'pilotwave' block")
        for extra in ("traders", "time"):
            if extra in cfg:
                raise ConfigError(f"config: '{extra}' is not used by the pilotwave model")
        return cfg
    for key in ("traders", "time"):
        if key not in cfg:
            raise ConfigError(f"config: model '{model}' needs a '{key}' block")
    if "pilotwave" in cfg:
        raise ConfigError("config: 'pilotwave' block given for a market model")
    for j, trader in enumerate(cfg["traders"]):
        _validate(trader, TRADER_SCHEMAS[model], f"config.traders.{j}")
        _fill_defaults(trader, TRADER_SCHEMAS[model])
    orc = cfg["oracle"]
    if ("k_min" in orc) != ("k_max" in orc):
        raise ConfigError("config.oracle: give both k_min and k_max or neither")
    return cfg


def load_config(path) -> dict:
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return validate_config(raw)


def load_sweep(path) -> dict:
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read sweep spec {path}: {exc}") from None
    return validate_sweep(raw)


def validate_sweep(raw: dict) -> dict:
    _validate(raw, SWEEP_SCHEMA, "sweep")
    names = [p["name"] for p in raw["parameters"]]
    if len(set(names)) != len(names):
        raise ConfigError("sweep: duplicate parameter names")
    return copy.deepcopy(raw)


def _density(value):
    if isinstance(value, dict):
        return TabulatedDensity(value["k"], value["n"])
    return float(value)


def _wrap(exc):
    return ConfigError(f"config: {exc}")


@dataclass(frozen=True)
class TraderSetup:
    name: str
    params: object  # TraderParams, ReservoirSpecII or Model3Params
    init: MarketInit


def trader_setups(cfg: dict) -> list[TraderSetup]:
    """Model records for every trader block of a validated market config."""
    out = []
    for j, t in enumerate(cfg["traders"]):
        init_block = t["init"]
        try:
            init = MarketInit(init_block["shares"], init_block["cash"], init_block.get("loi", 0))
            if cfg["model"] == "model1":
                params = TraderParams(t["omega_s"], t["omega_c"], t["Omega"], t["lambda_inf"])
            elif cfg["model"] == "model2":
                params = ReservoirSpecII(t["omega"], t["Omega_slope"], t["lambda_inf"], _density(t["n_density"]))
            else:
                params = Model3Params(
                    t["omega_s"], t["omega_c"], t["Omega"], t["Omega_r_slope"],
                    t["lambda_inf"], t["gamma"], _density(t["n_r_density"]),
                )
        except ValueError as exc:
            raise _wrap(exc) from None
        out.append(TraderSetup(t.get("name", f"trader{j + 1}"), params, init))
    return out


def config_time_grid(cfg: dict):
    tb = cfg["time"]
    return time_grid(tb["t_max"], tb["n_samples"])


def set_path(cfg: dict, dotted: str, value: float) -> None:
    """Assign ``value`` at a dotted path such as ``traders.0.gamma``; the leaf must exist."""
    parts = dotted.split(".")
    node = cfg
    try:
        for part in parts[:-1]:
            node = node[int(part)] if isinstance(node, list) else node[part]
        leaf = parts[-1]
        if isinstance(node, list):
            current = node[int(leaf)]
        else:
            current = node[leaf]
    except (KeyError, IndexError, ValueError, TypeError):
        raise ConfigError(f"sweep: unknown parameter {dotted!r}") from None
    if isinstance(current, bool) or not isinstance(current, (int, float)):
        raise ConfigError(f"sweep: parameter {dotted!r} is not numeric")
    if isinstance(current, int) and not float(value).is_integer():
        raise ConfigError(f"sweep: parameter {dotted!r} is an integer; got {value}")
    value = int(value) if isinstance(current, int) else float(value)
    if isinstance(node, list):
        node[int(leaf)] = value
    else:
        node[leaf] = value
