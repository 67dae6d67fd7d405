"""JSON schemas for set, domain and solver configurations.

Validation errors carry the JSON pointer of the offending value.
"""

import json
from pathlib import Path

import jsonschema

from . import cones
from .errors import ConfigError, DirichletError

_matrix = {"type": "array", "items": {"type": "array", "items": {"type": "number"}}}

_SET = {
    "type": "object",
    "required": ["name"],
    "additionalProperties": False,
    "properties": {
        "name": {"enum": cones.catalog_names()},
        "n": {"type": "integer", "minimum": 1, "maximum": 16},
        "params": {"type": "object"},
        "ops": {
            "type": "array",
            "items": {
                "oneOf": [
                    {"const": "dual"},
                    {"type": "object", "required": ["op"], "additionalProperties": False,
                     "properties": {"op": {"const": "dual"}}},
                    {"type": "object", "required": ["op", "A0"], "additionalProperties": False,
                     "properties": {"op": {"const": "translate"}, "A0": _matrix}},
                    {"type": "object", "required": ["op", "g"], "additionalProperties": False,
                     "properties": {"op": {"const": "conjugate"}, "g": _matrix}},
                    {"type": "object", "required": ["op", "with"], "additionalProperties": False,
                     "properties": {"op": {"enum": ["intersect", "union"]},
                                    "with": {"type": "array", "minItems": 1, "items": {"$ref": "#/$defs/set"}}}},
                    {"type": "object", "required": ["op", "n"], "additionalProperties": False,
                     "properties": {"op": {"const": "product_extend"},
                                    "n": {"type": "integer", "minimum": 2},
                                    "W": {"type": "array", "items": {"type": "integer", "minimum": 0}}}},
                ]
            },
        },
    },
}

SET_SCHEMA = {"$ref": "#/$defs/set", "$defs": {"set": _SET}}

DOMAIN_SCHEMA = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["ball", "ellipsoid", "expr"]},
        "n": {"type": "integer", "minimum": 2, "maximum": 3},
        "params": {"type": "object"},
        "expr": {"type": "string"},
        "bbox": {"type": "array", "minItems": 2, "maxItems": 2,
                 "items": {"type": "array", "items": {"type": "number"}}},
        "interior_point": {"type": "array", "items": {"type": "number"}},
    },
    "if": {"properties": {"kind": {"const": "expr"}}},
    "then": {"required": ["expr", "n", "bbox"]},
}

_vector = {"type": "array", "minItems": 2, "maxItems": 3, "items": {"type": "number"}}

SOLVE_SCHEMA = {
    "$defs": {"set": _SET},
    "type": "object",
    "required": ["set", "box", "h", "phi"],
    "additionalProperties": False,
    "properties": {
        "set": {"oneOf": [{"type": "string"}, {"$ref": "#/$defs/set"}]},
        "box": {"type": "object", "required": ["lo", "hi"], "additionalProperties": False,
                "properties": {"lo": _vector, "hi": _vector}},
        "h": {"type": "number", "exclusiveMinimum": 0},
        "phi": {"type": "string", "minLength": 1},
        "init": {"enum": ["affine_interp", "boundary_min", "harmonic", "noisy", "multilevel"]},
        "sweep": {"enum": ["lexicographic", "red_black"]},
        "damping": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "max_iters": {"type": "integer", "minimum": 1},
        "tol_update": {"type": "number", "exclusiveMinimum": 0},
        "tol_residual": {"type": "number", "exclusiveMinimum": 0},
        "seed": {"type": "integer"},
    },
}


def _pointer(path):
    return "/" + "/".join(str(p).replace("~", "~0").replace("/", "~1") for p in path) if path else ""


def validate(instance, schema):
    """Raise ConfigError at the most relevant violation, if any."""
    validator = jsonschema.Draft202012Validator(schema)
    err = jsonschema.exceptions.best_match(validator.iter_errors(instance))
    if err is not None:
        raise ConfigError(err.message, _pointer(err.absolute_path))
    return instance


def load_json(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}", "") from None
    return loads(text)


def loads(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc.msg} (line {exc.lineno}, column {exc.colno})", "") from None


def set_from_json(spec, n=None):
    """Validated set spec (a catalog name or an object) to a ConeSet."""
    if isinstance(spec, str):
        spec = {"name": spec}
    validate(spec, SET_SCHEMA)
    try:
        return cones.from_spec(spec, n=n)
    except (DirichletError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc), "/params" if "params" in spec else "") from None


def domain_from_json(spec):
    from . import geometry
    validate(spec, DOMAIN_SCHEMA)
    try:
        return geometry.domain_from_spec(spec)
    except (DirichletError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc), "/params" if "params" in spec else "") from None


def solve_config_from_json(data, seed=None):
    """Validated solve config to a SolveConfig; ``seed`` overrides the file's seed."""
    from . import solver
    validate(data, SOLVE_SCHEMA)
    lo, hi = data["box"]["lo"], data["box"]["hi"]
    if len(lo) != len(hi):
        raise ConfigError("box corners differ in dimension", "/box/hi")
    F = set_from_json(data["set"], n=len(lo))
    kw = {k: data[k] for k in ("init", "sweep", "damping", "max_iters", "tol_update", "tol_residual", "seed")
          if k in data}
    if seed is not None:
        kw["seed"] = seed
    try:
        return solver.SolveConfig(F=F, lo=tuple(lo), hi=tuple(hi), h=float(data["h"]), phi=data["phi"], **kw)
    except DirichletError as exc:
        raise ConfigError(str(exc), "") from None
