"""Configuration documents and file writers (CSV, JSON, OBJ, NPZ)."""

from __future__ import annotations

import copy
import csv
import json
import math
from pathlib import Path

import jsonschema
import numpy as np
import yaml

from .errors import ConfigError

SCHEMA_VERSION = 1

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "$id": "rocflow/config.schema.json",
    "title": "rocflow run configuration",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "seed": {"type": "integer"},
        "flow": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "catalog": {"enum": ["mean_curv_pow", "gauss_curv_pow", "mean_radius_pow", "linear_weingarten"]},
                "params": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {"n": _NUM, "a": _NUM, "b": _NUM, "c": _NUM,
                                   "norm": {"enum": ["table", "geometric"]}},
                },
                "expr": {"type": "string", "minLength": 1},
            },
            "oneOf": [{"required": ["catalog"], "not": {"required": ["expr"]}},
                      {"required": ["expr"], "not": {"required": ["catalog"]}}],
        },
        "initial": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "type": {"enum": ["sphere", "harmonic", "random", "snapshot"]},
                "radius": _POS,
                "center": {"type": "array", "items": _NUM, "minItems": 3, "maxItems": 3},
                "terms": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["l", "amp"],
                        "properties": {"l": {"type": "integer", "minimum": 0},
                                       "m": {"type": "integer"}, "amp": _NUM},
                    },
                },
                "amplitude": _POS,
                "l_max": {"type": "integer", "minimum": 2},
                "path": {"type": "string"},
            },
            "required": ["type"],
        },
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"n": {"type": "integer", "minimum": 33}},
        },
        "time": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"t_max": _POS, "cfl": {"type": "number", "exclusiveMinimum": 0, "maximum": 0.5}},
        },
        "stop": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "min_convexity": {"type": "number", "minimum": 0},
                "min_psi_frac": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                "converge_tol": {"type": ["number", "null"], "exclusiveMinimum": 0},
            },
        },
        "outputs": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dir": {"type": "string"},
                "monitor_every": {"type": "integer", "minimum": 1},
                "snapshot_every": {"type": "integer", "minimum": 0},
                "mesh": {"type": "boolean"},
                "figures": {"type": "boolean"},
                "figure_format": {"enum": ["svg", "png"]},
            },
        },
        "region": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "psi": {"type": "array", "items": _POS, "minItems": 2, "maxItems": 2},
                "s_max_frac": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "samples": {"type": "integer", "minimum": 4},
            },
        },
        "ode": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "start": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
                "dt": _POS,
                "t_span": _NUM,
                "stop_gap": {"type": "number", "minimum": 0},
            },
        },
        "flowlines": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "levels": {"oneOf": [{"type": "integer", "minimum": 1},
                                     {"type": "array", "items": _NUM, "minItems": 1}]},
                "through": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
                "resolution": {"type": "integer", "minimum": 20},
            },
        },
    },
}

DEFAULT_CONFIG = {
    "schema_version": SCHEMA_VERSION,
    "seed": 0,
    "flow": {"catalog": "mean_curv_pow", "params": {"n": 1.0}},
    "initial": {"type": "sphere", "radius": 1.0},
    "grid": {"n": 65},
    "time": {"t_max": 0.1, "cfl": 0.2},
    "stop": {"min_convexity": 0.0, "min_psi_frac": 0.05, "converge_tol": None},
    "outputs": {"dir": "rocflow_out", "monitor_every": 10, "snapshot_every": 0, "mesh": False,
                "figures": True, "figure_format": "svg"},
    "region": {"psi": [0.2, 4.0], "s_max_frac": 0.95, "samples": 64},
    "ode": {"start": [2.0, 1.0], "dt": 1e-4, "t_span": 10.0, "stop_gap": 0.1},
    "flowlines": {"levels": 12, "resolution": 200},
}

_VERDICT = {
    "type": "object",
    "additionalProperties": False,
    "required": ["status", "detail", "worst_violation", "at_t"],
    "properties": {
        "status": {"enum": ["pass", "fail", "not_applicable"]},
        "detail": {"type": "string"},
        "worst_violation": {"type": "number"},
        "at_t": {"type": ["number", "null"]},
    },
}

VERDICTS_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "$id": "rocflow/verdicts.schema.json",
    "title": "rocflow simulation verdicts",
    "type": "object",
    "additionalProperties": False,
    "required": ["schema_version", "flow", "reason", "message", "t_final", "steps", "grid_n", "verdicts"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "flow": {"type": "string"},
        "reason": {"enum": ["Converged", "ConvexityLost", "DomainExit", "TMaxReached"]},
        "message": {"type": "string"},
        "t_final": {"type": "number"},
        "steps": {"type": "integer", "minimum": 0},
        "grid_n": {"type": "integer"},
        "verdicts": {
            "type": "object",
            "additionalProperties": False,
            "required": ["thm2", "thm3", "thm4"],
            "properties": {"thm2": _VERDICT, "thm3": _VERDICT, "thm4": _VERDICT},
        },
    },
}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k != "flow":
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def validate_config(doc: dict) -> None:
    try:
        jsonschema.validate(doc, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid configuration at {where}: {exc.message}") from None


def load_config(path=None, overrides: dict | None = None) -> dict:
    """Read a YAML/JSON document, validate it and fill defaults."""
    doc = {}
    if path is not None:
        p = Path(path)
        try:
            text = p.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {p}: {exc}") from None
        try:
            doc = json.loads(text) if p.suffix == ".json" else yaml.safe_load(text)
        except (json.JSONDecodeError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot parse config {p}: {exc}") from None
        doc = doc or {}
        if not isinstance(doc, dict):
            raise ConfigError("configuration document must be a mapping")
    validate_config(doc)
    cfg = _merge(DEFAULT_CONFIG, doc)
    if overrides:
        cfg = _merge(cfg, overrides)
    validate_config(cfg)
    return cfg


# --------------------------------------------------------------------------
# writers


def _fmt(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    return repr(x)


def write_csv(path, header, rows) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else _fmt(v) for v in row])


def read_csv(path):
    with Path(path).open(encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], [[float(v) for v in r] for r in rows[1:]]


def write_json(path, doc, schema=None) -> None:
    if schema is not None:
        jsonschema.validate(doc, schema)
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n", encoding="utf-8")


def write_obj(path, mesh, comment: str = "rocflow surface") -> None:
    """Vertices, per-vertex normals (vn) and quad faces (1-based v//vn)."""
    lines = [f"# {comment}"]
    lines += [f"v {x:.10g} {y:.10g} {z:.10g}" for x, y, z in mesh.vertices]
    lines += [f"vn {x:.10g} {y:.10g} {z:.10g}" for x, y, z in mesh.normals]
    for face in mesh.faces:
        lines.append("f " + " ".join(f"{i + 1}//{i + 1}" for i in face))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_obj(path):
    verts, norms, faces = [], [], []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        parts = line.split()
        if not parts or parts[0].startswith("#"):
            continue
        if parts[0] == "v":
            verts.append([float(v) for v in parts[1:4]])
        elif parts[0] == "vn":
            norms.append([float(v) for v in parts[1:4]])
        elif parts[0] == "f":
            faces.append([int(p.split("/")[0]) - 1 for p in parts[1:]])
    return np.array(verts), np.array(norms), np.array(faces)
