"""JSON model files: schema validation and construction of models and solver settings."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import jsonschema
import numpy as np

from .assembly import EDGES, Model
from .constitutive import MODELS, Material
from .continuation import VARIANTS, ContinuationSettings, ShellProblem
from .metric import curviness
from .nurbs import NurbsSurface
from .presets import PRESETS, preset


class ModelFileError(ValueError):
    pass


_PAIR = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_VEC3 = {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3}
_COMPONENTS = {"type": "array", "items": {"type": "integer", "minimum": 0, "maximum": 2}}
_EDGE = {"enum": list(EDGES)}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["geometry", "thickness", "material"],
    "properties": {
        "name": {"type": "string"},
        "geometry": {
            "oneOf": [
                {"enum": list(PRESETS)},
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["degree_u", "degree_v", "knots_u", "knots_v", "control_points"],
                    "properties": {
                        "degree_u": {"type": "integer", "minimum": 1},
                        "degree_v": {"type": "integer", "minimum": 1},
                        "knots_u": {"type": "array", "items": {"type": "number"}},
                        "knots_v": {"type": "array", "items": {"type": "number"}},
                        "control_points": {"type": "array", "items": {
                            "type": "array", "items": {"type": "number"}, "minItems": 4, "maxItems": 4}},
                    },
                },
            ]
        },
        "thickness": {"type": "number", "exclusiveMinimum": 0},
        "material": {
            "type": "object",
            "additionalProperties": False,
            "required": ["E", "nu"],
            "properties": {"E": {"type": "number", "exclusiveMinimum": 0},
                           "nu": {"type": "number", "minimum": 0, "exclusiveMaximum": 0.5}},
        },
        "refinement": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "elements_u": {"type": "integer", "minimum": 1},
                "elements_v": {"type": "integer", "minimum": 1},
                "degree": {"type": "integer", "minimum": 2},
                "continuity": {"type": "integer", "minimum": 0},
                "gauss_rule": {"enum": ["p+1", "p"]},
            },
        },
        "constraints": {"type": "array", "items": {
            "type": "object",
            "additionalProperties": False,
            "required": ["type"],
            "properties": {
                "type": {"enum": ["fix", "clamp", "symmetry", "diaphragm", "couple"]},
                "edge": _EDGE,
                "rows": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                "components": _COMPONENTS,
                "axis": {"type": "integer", "minimum": 0, "maximum": 2},
                "points": {"type": "array", "items": {"type": "integer", "minimum": 0}},
            },
        }},
        "loads": {"type": "array", "items": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "type": {"enum": ["point", "traction"]},
                "at": _PAIR,
                "force": _VEC3,
                "traction": _VEC3,
            },
        }},
        "constitutive": {"enum": list(MODELS)},
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "method": {"enum": ["linear", "newton", "arc_length"]},
                "variant": {"enum": list(VARIANTS)},
                "initial_lpf_step": {"type": "number", "exclusiveMinimum": 0},
                "initial_arc_length": {"type": ["number", "null"], "exclusiveMinimum": 0},
                "desired_iterations": {"type": "integer", "minimum": 1},
                "max_increments": {"type": "integer", "minimum": 1},
                "max_iterations": {"type": "integer", "minimum": 1},
                "force_tolerance": {"type": "number", "exclusiveMinimum": 0},
                "displacement_tolerance": {"type": "number", "exclusiveMinimum": 0},
                "target_lpf": {"type": ["number", "null"]},
                "steps": {"type": "integer", "minimum": 1},
                "scale": {"type": "boolean"},
                "strain_update": {"enum": ["metric", "linear"]},
                "stop": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["monitor"],
                    "properties": {"monitor": {"type": "string"}, "max": {"type": "number"},
                                   "min": {"type": "number"}},
                },
            },
        },
        "monitors": {"type": "array", "items": {
            "type": "object",
            "additionalProperties": False,
            "required": ["name", "at", "direction"],
            "properties": {"name": {"type": "string"}, "at": _PAIR, "direction": _VEC3},
        }},
        "points": {"type": "object", "additionalProperties": _PAIR},
        "initial_curviness": {"type": "number", "minimum": 0},
        "outputs": {"type": "array", "items": {"enum": ["path", "report", "fields"]}},
        "field_grid": {"type": "integer", "minimum": 1},
    },
}


def _describe(err: jsonschema.ValidationError) -> str:
    where = "/".join(str(p) for p in err.absolute_path) or "<root>"
    if err.validator == "additionalProperties":
        extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
        return f"unknown key(s) {extra} at {where}"
    return f"{where}: {err.message}"


def validate(doc: dict) -> None:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        best = jsonschema.exceptions.best_match(errors)
        raise ModelFileError(_describe(best))


def load(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ModelFileError(f"invalid JSON in {path}: {exc}") from None
    validate(doc)
    return doc


@dataclass
class Analysis:
    model: Model
    problem: ShellProblem
    method: str
    settings: ContinuationSettings
    steps: int
    doc: dict


def _stop_rule(spec):
    if spec is None:
        return None
    name, hi, lo = spec["monitor"], spec.get("max"), spec.get("min")

    def stop(monitors, lam):
        v = monitors[name]
        return (hi is not None and v >= hi) or (lo is not None and v <= lo)

    return stop


def build(doc: dict, constitutive: str | None = None, variant: str | None = None,
          check_curviness: bool = True) -> Analysis:
    """Model, problem adapter and solver settings of a validated document."""
    validate(doc)
    geometry = doc["geometry"]
    if isinstance(geometry, str):
        geometry = preset(geometry)["geometry"]
    surface = NurbsSurface.from_dict(geometry)
    ref = doc.get("refinement", {})
    if ref:
        surface = surface.refine(ref.get("elements_u", 1), ref.get("elements_v", 1),
                                 ref.get("degree"), ref.get("degree"), ref.get("continuity"))
    solver = dict(doc.get("solver", {}))
    model = Model(
        surface, Material(**doc["material"]), doc["thickness"],
        constitutive=constitutive or doc.get("constitutive", "Da"),
        constraints=doc.get("constraints", []), loads=doc.get("loads", []),
        gauss_rule=ref.get("gauss_rule", "p+1"), strain_update=solver.pop("strain_update", "metric"),
    )
    model.monitors = list(doc.get("monitors", []))
    names = [m["name"] for m in model.monitors]
    if len(set(names)) != len(names):
        raise ModelFileError("monitor names must be unique")
    if check_curviness and "initial_curviness" in doc:
        kh = curviness(model.reference_metric, model.thickness)
        expected = doc["initial_curviness"]
        if not np.allclose(kh, expected, rtol=1e-6, atol=1e-12):
            raise ModelFileError(f"initial curviness {kh.min():.6g}..{kh.max():.6g} differs from declared {expected:.6g}")
    method = solver.pop("method", "arc_length")
    steps = solver.pop("steps", 10)
    stop = solver.pop("stop", None)
    if stop is not None and stop["monitor"] not in names:
        raise ModelFileError(f"stop monitor {stop['monitor']!r} is not defined")
    if variant is not None:
        solver["variant"] = variant
    settings = ContinuationSettings(**solver, stop=_stop_rule(stop))
    return Analysis(model, ShellProblem(model), method, settings, steps, doc)
