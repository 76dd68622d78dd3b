"""JSON configuration documents: schema, loading and overrides.

Field names carry SI units (``_ohm``, ``_H``, ``_F``, ``_s``, ``_hz``).
``omega1_hz`` is the resonant frequency of the PR controller in hertz; it
is converted to rad/s on load.  A document without a ``grid`` section (or
with ``"grid": null``) describes an islanded microgrid.
"""

from __future__ import annotations

import copy
import json
import math
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema

from .errors import ConfigError, FicdsError, InvalidParametersError, PathError
from .inverters import GridFollowingParams, GridFormingParams
from .sim import Event, SimConfig
from .tf import DEFAULT_PADE_ORDER
from .topology import DEFAULT_BAND, GridModel, MicrogridTopology, set_param

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}


def _obj(props, required=None):
    return {
        "type": "object",
        "properties": props,
        "required": list(props) if required is None else required,
        "additionalProperties": False,
    }


_GFL_FILTER = _obj({"L1_H": _pos, "R1_ohm": _nonneg, "C_F": _pos, "L2_H": _pos, "R2_ohm": _nonneg})
_GFM_FILTER = _obj({"L_H": _pos, "RL_ohm": _nonneg, "C_F": _pos})

_GFL = _obj(
    {
        "mode": {"const": "grid-following"},
        "kp": _nonneg,
        "ki": _nonneg,
        "omega1_hz": _pos,
        "Ts_s": _pos,
        "filter": _GFL_FILTER,
    }
)
_GFM = _obj(
    {
        "mode": {"const": "grid-forming"},
        "kp": _nonneg,
        "ki": _nonneg,
        "kpc": _nonneg,
        "omega1_hz": _pos,
        "Ts_s": _pos,
        "filter": _GFM_FILTER,
    }
)
_INVERTER = {
    "type": "object",
    "required": ["mode"],
    "properties": {"mode": {"enum": ["grid-following", "grid-forming"]}},
    "if": {"properties": {"mode": {"const": "grid-forming"}}},
    "then": _GFM,
    "else": _GFL,
}

_EVENT = {
    "type": "object",
    "required": ["time_s", "action"],
    "properties": {"action": {"enum": ["set", "switch", "island"]}},
    "allOf": [
        {
            "if": {"properties": {"action": {"const": "set"}}},
            "then": _obj({"time_s": _nonneg, "action": {"const": "set"}, "path": {"type": "string"}, "value": _num}),
        },
        {
            "if": {"properties": {"action": {"const": "switch"}}},
            "then": _obj(
                {"time_s": _nonneg, "action": {"const": "switch"}, "inverter": {"type": "integer", "minimum": 0}, "former": _GFM},
                required=["time_s", "action", "inverter", "former"],
            ),
        },
        {
            "if": {"properties": {"action": {"const": "island"}}},
            "then": _obj({"time_s": _nonneg, "action": {"const": "island"}}),
        },
    ],
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        "description": {"type": "string"},
        "grid": {"oneOf": [{"type": "null"}, _obj({"Rs_ohm": _nonneg, "Ls_H": _nonneg, "Vgrid_rms": _nonneg})]},
        "load": _obj({"R_ohm": _pos}),
        "inverters": {"type": "array", "minItems": 1, "items": _INVERTER},
        "analysis": _obj(
            {
                "pade_order": {"type": "integer", "minimum": 1},
                "threshold_band": _nonneg,
                "pade_orders_for_robustness": {
                    "type": "array",
                    "minItems": 1,
                    "items": {"type": "integer", "minimum": 1},
                },
            },
            required=[],
        ),
        "simulation": _obj(
            {
                "control_rate_hz": _pos,
                "plant_substeps": {"type": "integer", "minimum": 4},
                "duration_s": _num,
                "iref_amp_A": _num,
                "iref_phase_rad": _num,
                "vref_amp_V": _num,
                "vref_phase_rad": _num,
                "blowup_factor": _pos,
                "kick_fraction": _num,
                "controller_sampling": {"enum": ["substep", "control"]},
                "events": {"type": "array", "items": _EVENT},
            },
            required=[],
        ),
    },
    "required": ["load", "inverters"],
    "additionalProperties": False,
}


@dataclass(frozen=True)
class AnalysisSettings:
    pade_order: int = DEFAULT_PADE_ORDER
    threshold_band: float = DEFAULT_BAND
    robustness_orders: tuple = (4, 5, 6, 7, 8)


@dataclass(frozen=True)
class LoadedConfig:
    topology: MicrogridTopology
    analysis: AnalysisSettings
    simulation: SimConfig | None
    events: tuple = ()
    document: dict = field(default_factory=dict, compare=False)


def _format_path(parts) -> str:
    out = ""
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out


def _schema_error_path(err: jsonschema.ValidationError) -> str:
    parts = list(err.absolute_path)
    if err.validator == "required":
        m = re.match(r"'([^']+)' is a required property", err.message)
        if m:
            parts.append(m.group(1))
    elif err.validator == "additionalProperties":
        m = re.search(r"\('([^']+)'", err.message)
        if m:
            parts.append(m.group(1))
    return _format_path(parts)


def validate_document(doc) -> None:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: (len(list(e.absolute_path)), list(map(str, e.absolute_path))))
    if errors:
        err = jsonschema.exceptions.best_match(errors)
        # descend into the if/then branches so the message names the leaf field
        while err.context:
            err = jsonschema.exceptions.best_match(err.context)
        path = _schema_error_path(err)
        raise ConfigError(path, err.message)


_GFL_KEYS = {"L1": "filter.L1_H", "R1": "filter.R1_ohm", "C": "filter.C_F", "L2": "filter.L2_H", "R2": "filter.R2_ohm", "Ts": "Ts_s", "omega1": "omega1_hz"}
_GFM_KEYS = {"L": "filter.L_H", "RL": "filter.RL_ohm", "C": "filter.C_F", "Ts": "Ts_s", "omega1": "omega1_hz", "kpv": "kp", "kiv": "ki"}


def inverter_from_dict(d: dict, where: str = "inverter"):
    f = d["filter"]
    w1 = 2.0 * math.pi * d["omega1_hz"]
    try:
        if d["mode"] == "grid-forming":
            return GridFormingParams(
                kpv=d["kp"], kiv=d["ki"], kpc=d["kpc"], omega1=w1, Ts=d["Ts_s"], L=f["L_H"], RL=f["RL_ohm"], C=f["C_F"]
            )
        return GridFollowingParams(
            kp=d["kp"], ki=d["ki"], omega1=w1, Ts=d["Ts_s"],
            L1=f["L1_H"], R1=f["R1_ohm"], C=f["C_F"], L2=f["L2_H"], R2=f["R2_ohm"],
        )
    except InvalidParametersError as exc:
        keys = _GFM_KEYS if d["mode"] == "grid-forming" else _GFL_KEYS
        raise ConfigError(f"{where}.{keys.get(exc.field, exc.field)}", str(exc).split(": ", 1)[-1]) from exc


def inverter_to_dict(p) -> dict:
    hz = p.omega1 / (2.0 * math.pi)
    if isinstance(p, GridFormingParams):
        return {
            "mode": "grid-forming", "kp": p.kpv, "ki": p.kiv, "kpc": p.kpc, "omega1_hz": hz, "Ts_s": p.Ts,
            "filter": {"L_H": p.L, "RL_ohm": p.RL, "C_F": p.C},
        }
    return {
        "mode": "grid-following", "kp": p.kp, "ki": p.ki, "omega1_hz": hz, "Ts_s": p.Ts,
        "filter": {"L1_H": p.L1, "R1_ohm": p.R1, "C_F": p.C, "L2_H": p.L2, "R2_ohm": p.R2},
    }


def _set_document_value(doc: dict, path: str, value: float) -> None:
    section, key = path.split(".", 1)
    if "." in key or section not in ("analysis", "simulation"):
        raise PathError(path)
    doc.setdefault(section, {})[key] = value


def build(doc: dict, overrides: dict | None = None) -> LoadedConfig:
    """Validate ``doc`` and turn it into analysis inputs.

    ``overrides`` maps paths to numbers.  ``analysis.*`` and
    ``simulation.*`` keys edit the document before validation; every other
    path uses the topology grammar (``inverter[0].kp``, ``grid.Ls``, ...).
    """
    doc = copy.deepcopy(doc)
    topo_overrides = []
    for path, value in (overrides or {}).items():
        if path.startswith(("analysis.", "simulation.")):
            if path.endswith(("pade_order", "plant_substeps")) and float(value).is_integer():
                value = int(value)
            _set_document_value(doc, path, value)
        else:
            topo_overrides.append((path, value))
    validate_document(doc)

    invs = tuple(inverter_from_dict(d, f"inverters[{i}]") for i, d in enumerate(doc["inverters"]))
    g = doc.get("grid")
    try:
        grid = GridModel(g["Rs_ohm"], g["Ls_H"], g["Vgrid_rms"]) if g else None
        topo = MicrogridTopology("grid-connected" if grid else "islanded", doc["load"]["R_ohm"], invs, grid)
    except InvalidParametersError as exc:
        raise ConfigError(exc.field, str(exc).split(": ", 1)[-1]) from exc
    except FicdsError as exc:
        raise ConfigError("inverters", str(exc)) from exc
    for path, value in topo_overrides:
        try:
            topo = set_param(topo, path, value)
        except (InvalidParametersError, PathError) as exc:
            raise ConfigError(path, str(exc)) from exc

    a = doc.get("analysis", {})
    analysis = AnalysisSettings(
        a.get("pade_order", DEFAULT_PADE_ORDER),
        a.get("threshold_band", DEFAULT_BAND),
        tuple(a.get("pade_orders_for_robustness", (4, 5, 6, 7, 8))),
    )

    sim = None
    events = ()
    s = doc.get("simulation")
    if s is not None:
        mapping = {
            "control_rate_hz": "control_rate",
            "plant_substeps": "plant_substeps",
            "duration_s": "duration",
            "iref_amp_A": "iref_amp",
            "iref_phase_rad": "iref_phase",
            "vref_amp_V": "vref_amp",
            "vref_phase_rad": "vref_phase",
            "blowup_factor": "blowup_factor",
            "kick_fraction": "kick_fraction",
            "controller_sampling": "controller_sampling",
        }
        kwargs = {mapping[k]: v for k, v in s.items() if k in mapping}
        try:
            sim = SimConfig(**kwargs)
        except InvalidParametersError as exc:
            inv = {v: k for k, v in mapping.items()}
            raise ConfigError(f"simulation.{inv.get(exc.field, exc.field)}", str(exc).split(": ", 1)[-1]) from exc
        evs = []
        for i, e in enumerate(s.get("events", [])):
            former = inverter_from_dict(e["former"], f"simulation.events[{i}].former") if "former" in e else None
            evs.append(Event(e["time_s"], e["action"], e.get("path"), e.get("value"), e.get("inverter"), former))
        times = [e.time for e in evs]
        if times != sorted(times):
            raise ConfigError("simulation.events", "event times must be nondecreasing")
        events = tuple(evs)
    return LoadedConfig(topo, analysis, sim, events, doc)


SHIPPED = ("table1_a1", "table1_a2", "table1_b1", "table1_b2", "scenario_b")


def shipped_config_path(name: str):
    """Path (a Traversable) of a config shipped with the package."""
    stem = name[:-5] if name.endswith(".json") else name
    if stem not in SHIPPED:
        raise ConfigError("", f"no shipped config named {name!r}")
    return resources.files("ficds").joinpath("configs", f"{stem}.json")


def read_document(path) -> dict:
    """Parse a config file; bare shipped names (``table1_a1``) are resolved too."""
    p = Path(path)
    if not p.exists():
        stem = p.name[:-5] if p.name.endswith(".json") else p.name
        if str(path) in (stem, stem + ".json") and stem in SHIPPED:
            text = shipped_config_path(stem).read_text(encoding="utf-8")
        else:
            raise FileNotFoundError(f"config file not found: {path}")
    else:
        text = p.read_text(encoding="utf-8")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"invalid JSON: {exc}") from exc


def load(path, overrides: dict | None = None) -> LoadedConfig:
    return build(read_document(path), overrides)
