"""JSON configuration files: chain configurations, generator specs, pump paths and priors.

Every document is validated against a Draft-7 schema before anything is
built from it; errors name the offending key path.
"""
import csv
import json
import jsonlines
import numpy as np

from dataclasses import dataclass
from typing import List

from jsonschema import Draft7Validator
from jsonschema.exceptions import best_match

from .budget import Attenuator, Coupler, Prior
from .chainmodel import (DEFAULT_BAND, DEFAULT_HOT_BATH_K, IDLER_MODES,
                         ChainConfig, Follower, LossStage, ParamAmp)
from .errors import ConfigError, CurveFormatError, InvalidQuantityError
from .sources import SntjParams, VtsParams

_PROFILE = {"oneOf": [
    {"type": "number"},
    {"type": "array", "minItems": 1,
     "items": {"type": "array", "minItems": 2, "maxItems": 2,
               "items": {"type": "number"}}}]}

_STAGE_FIELDS = {
    "loss": ("eta", "idler_eta"),
    "paramp": ("gain_db", "excess_k", "excess_idler_k"),
    "follower": ("gain_db", "added_noise_k"),
}
_REQUIRED_FIELDS = {
    "loss": ("eta",),
    "paramp": ("gain_db",),
    "follower": ("gain_db", "added_noise_k"),
}

CHAIN_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "required": ["frequency_grid", "stages"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "frequency_grid": {
            "type": "object",
            "required": ["start_hz", "stop_hz", "points"],
            "additionalProperties": False,
            "properties": {"start_hz": {"type": "number", "exclusiveMinimum": 0},
                           "stop_hz": {"type": "number", "exclusiveMinimum": 0},
                           "points": {"type": "integer", "minimum": 1}}},
        "stages": {
            "type": "array", "minItems": 1,
            "items": {
                "type": "object",
                "required": ["kind", "label"],
                "additionalProperties": False,
                "properties": {
                    "kind": {"enum": sorted(_STAGE_FIELDS)},
                    "label": {"type": "string", "minLength": 1},
                    "stage_temp_k": {"type": "number", "minimum": 0},
                    "eta": _PROFILE,
                    "idler_eta": _PROFILE,
                    "gain_db": _PROFILE,
                    "excess_k": _PROFILE,
                    "excess_idler_k": _PROFILE,
                    "added_noise_k": _PROFILE}}},
        "idler_mode": {"enum": list(IDLER_MODES)},
        "pump_freq_hz": {"type": "number", "exclusiveMinimum": 0},
        "band_avg": {
            "type": "object",
            "required": ["lo_hz", "hi_hz"],
            "additionalProperties": False,
            "properties": {"lo_hz": {"type": "number", "exclusiveMinimum": 0},
                           "hi_hz": {"type": "number", "exclusiveMinimum": 0}}},
    },
}

_RANGE = {"type": "object",
          "required": ["start", "stop", "points"],
          "additionalProperties": False,
          "properties": {"start": {"type": "number"},
                         "stop": {"type": "number"},
                         "points": {"type": "integer", "minimum": 2}}}

GENERATOR_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "required": ["source", "frequencies_hz", "chain_gain", "n_sigma_off"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "source": {"enum": ["sntj", "vts"]},
        "frequencies_hz": {"type": "array", "minItems": 1,
                           "items": {"type": "number", "exclusiveMinimum": 0}},
        "chain_gain": {"type": "number", "exclusiveMinimum": 0},
        "n_sigma_off": {"type": "number", "minimum": 0},
        "rel_noise": {"type": "number", "minimum": 0},
        "sntj": {"type": "object",
                 "required": ["temperature_k", "resistance_ohm", "bias_v"],
                 "additionalProperties": False,
                 "properties": {"temperature_k": {"type": "number", "minimum": 0},
                                "resistance_ohm": {"type": "number", "exclusiveMinimum": 0},
                                "v_offset_v": {"type": "number"},
                                "bias_v": _RANGE}},
        "vts": {"type": "object",
                "required": ["temperatures_k"],
                "additionalProperties": False,
                "properties": {"temperatures_k": {"type": "array", "minItems": 3,
                                                  "items": {"type": "number", "minimum": 0}}}},
    },
}

PUMP_PATH_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "required": ["delivered_dbm", "path"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "delivered_dbm": {"type": "number"},
        "path": {"type": "array",
                 "items": {"type": "object",
                           "required": ["kind", "label", "stage_temp_k"],
                           "additionalProperties": False,
                           "properties": {
                               "kind": {"enum": ["attenuator", "coupler"]},
                               "label": {"type": "string"},
                               "stage_temp_k": {"type": "number", "minimum": 0},
                               "atten_db": {"type": "number", "minimum": 0},
                               "coupling_db": {"type": "number", "minimum": 0},
                               "termination_temp_k": {"type": "number", "minimum": 0}}}},
    },
}

PRIORS_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "required": ["priors"],
    "additionalProperties": False,
    "properties": {
        "n_samples": {"type": "integer", "minimum": 100},
        "priors": {"type": "object",
                   "additionalProperties": {
                       "type": "object",
                       "required": ["sigma"],
                       "additionalProperties": False,
                       "properties": {"sigma": {"type": "number", "minimum": 0},
                                      "mean": {"type": "number"}}}},
    },
}


def load_json(path):
    """Read a JSON document, mapping I/O and syntax errors to ConfigError."""
    try:
        with open(path, encoding="utf-8") as fin:
            return json.load(fin)
    except OSError as e:
        raise ConfigError("cannot read %s: %s" % (path, e.strerror or e))
    except json.JSONDecodeError as e:
        raise ConfigError("%s is not valid JSON (line %d, column %d): %s" %
                          (path, e.lineno, e.colno, e.msg))


def validate(doc, schema):
    """Validate ``doc`` against ``schema``; raise ConfigError on the most relevant error."""
    error = best_match(Draft7Validator(schema).iter_errors(doc))
    if error is not None:
        key = ".".join(str(p) for p in error.absolute_path) or "<root>"
        raise ConfigError(error.message, key=key)


def _stage_from_dict(i, d):
    kind = d["kind"]
    key = "stages.%d" % i
    extra = [k for k in d if k not in ("kind", "label", "stage_temp_k")
             and k not in _STAGE_FIELDS[kind]]
    if extra:
        raise ConfigError("%s stages take no %s" % (kind, ", ".join(sorted(extra))), key=key)
    missing = [k for k in _REQUIRED_FIELDS[kind] if k not in d]
    if missing:
        raise ConfigError("%s stage needs %s" % (kind, ", ".join(missing)), key=key)
    temp = d.get("stage_temp_k", DEFAULT_HOT_BATH_K)
    try:
        if kind == "loss":
            return LossStage(d["label"], d["eta"], bath_k=temp, idler_eta=d.get("idler_eta"))
        if kind == "paramp":
            return ParamAmp(d["label"], d["gain_db"], excess_k=d.get("excess_k", 0.0),
                            excess_idler_k=d.get("excess_idler_k", 0.0), stage_temp_k=temp)
        return Follower(d["label"], d["gain_db"], d["added_noise_k"], stage_temp_k=temp)
    except InvalidQuantityError as e:
        raise ConfigError(str(e), key=key)


def chain_from_dict(doc):
    """Build a ChainConfig from a validated-or-not configuration document."""
    validate(doc, CHAIN_SCHEMA)
    grid = doc["frequency_grid"]
    freqs = np.linspace(grid["start_hz"], grid["stop_hz"], grid["points"])
    stages = tuple(_stage_from_dict(i, d) for i, d in enumerate(doc["stages"]))
    band = DEFAULT_BAND
    if "band_avg" in doc:
        band = (doc["band_avg"]["lo_hz"], doc["band_avg"]["hi_hz"])
    try:
        return ChainConfig(stages, freqs,
                           idler_mode=doc.get("idler_mode", "same"),
                           pump_freq=doc.get("pump_freq_hz"),
                           band=band,
                           name=doc.get("name", ""))
    except InvalidQuantityError as e:
        raise ConfigError(str(e), key="frequency_grid")


def load_chain(path):
    return chain_from_dict(load_json(path))


def chain_to_dict(cfg):
    """Inverse of ``chain_from_dict`` for configurations on a uniform grid."""
    stages = []
    for st in cfg.stages:
        d = {"kind": st.kind, "label": st.label, "stage_temp_k": float(st.stage_temp_k)}
        for name in _STAGE_FIELDS[st.kind]:
            value = getattr(st, name)
            if value is not None:
                d[name] = value.to_json()
        stages.append(d)
    doc = {"name": cfg.name,
           "frequency_grid": {"start_hz": float(cfg.freqs[0]), "stop_hz": float(cfg.freqs[-1]),
                              "points": len(cfg.freqs)},
           "stages": stages,
           "idler_mode": cfg.idler_mode,
           "band_avg": {"lo_hz": float(cfg.band[0]), "hi_hz": float(cfg.band[1])}}
    if cfg.pump_freq is not None:
        doc["pump_freq_hz"] = float(cfg.pump_freq)
    return doc


@dataclass
class GeneratorSpec:
    """What ``synth`` generates: one curve per frequency from one source."""
    name: str
    source: object
    freqs: List[float]
    chain_gain: float
    n_sigma_off: float
    rel_noise: float


def load_generator(path):
    doc = load_json(path)
    validate(doc, GENERATOR_SCHEMA)
    kind = doc["source"]
    if kind not in doc:
        raise ConfigError("a %s generator needs a %r section" % (kind, kind), key=kind)
    try:
        if kind == "sntj":
            s = doc["sntj"]
            bias = np.linspace(s["bias_v"]["start"], s["bias_v"]["stop"], s["bias_v"]["points"])
            source = SntjParams(s["temperature_k"], s["resistance_ohm"],
                                s.get("v_offset_v", 0.0), bias)
        else:
            source = VtsParams(doc["vts"]["temperatures_k"])
    except InvalidQuantityError as e:
        raise ConfigError(str(e), key=kind)
    return GeneratorSpec(doc.get("name", kind), source, list(doc["frequencies_hz"]),
                         doc["chain_gain"], doc["n_sigma_off"], doc.get("rel_noise", 0.0))


def load_pump_path(path):
    """Read a pump-path document.

    Returns:
        float: the delivered power (dBm)
        list of Attenuator or Coupler: the path, from the source end
    """
    doc = load_json(path)
    validate(doc, PUMP_PATH_SCHEMA)
    elements = []
    for i, d in enumerate(doc["path"]):
        key = "path.%d" % i
        if d["kind"] == "attenuator":
            if "atten_db" not in d:
                raise ConfigError("an attenuator needs atten_db", key=key)
            elements.append(Attenuator(d["label"], d["atten_db"], d["stage_temp_k"]))
        else:
            if "coupling_db" not in d or "termination_temp_k" not in d:
                raise ConfigError("a coupler needs coupling_db and termination_temp_k", key=key)
            elements.append(Coupler(d["label"], d["coupling_db"], d["stage_temp_k"],
                                    d["termination_temp_k"]))
    return doc["delivered_dbm"], elements


def load_priors(path):
    """Read a priors document: returns (dict of name -> Prior, n_samples or None)."""
    doc = load_json(path)
    validate(doc, PRIORS_SCHEMA)
    priors = {name: Prior(p["sigma"], p.get("mean")) for name, p in doc["priors"].items()}
    return priors, doc.get("n_samples")


def read_table_csv(path, columns):
    """Read named numeric columns of a CSV file with a header row.

    Args:
        path (str): the file
        columns (list of str): the columns to return

    Returns:
        dict of str -> ndarray: one array per requested column
    """
    try:
        fin = open(path, newline="", encoding="utf-8")
    except OSError as e:
        raise ConfigError("cannot read %s: %s" % (path, e.strerror or e))
    with fin:
        reader = csv.DictReader(fin)
        if reader.fieldnames is None:
            raise CurveFormatError("%s is empty" % path)
        missing = [c for c in columns if c not in reader.fieldnames]
        if missing:
            raise CurveFormatError("%s lacks columns %s" % (path, missing))
        out = {c: [] for c in columns}
        for lineno, row in enumerate(reader, start=2):
            for c in columns:
                try:
                    out[c].append(float(row[c]))
                except (TypeError, ValueError):
                    raise CurveFormatError("%s:%d: %s is not a number" % (path, lineno, c))
    if not out[columns[0]]:
        raise CurveFormatError("%s has no data rows" % path)
    return {c: np.array(v) for c, v in out.items()}


def read_fit_records(path):
    """Read the records of a fit-result JSON-lines file."""
    try:
        with jsonlines.open(path) as reader:
            records = list(reader)
    except OSError as e:
        raise ConfigError("cannot read %s: %s" % (path, e.strerror or e))
    except jsonlines.InvalidLineError as e:
        raise ConfigError("%s: invalid JSON line: %s" % (path, e))
    if not records:
        raise ConfigError("%s has no fit records" % path)
    for i, rec in enumerate(records):
        if not isinstance(rec, dict) or "frequency" not in rec:
            raise ConfigError("record %d has no frequency" % i, key=path)
    return records
