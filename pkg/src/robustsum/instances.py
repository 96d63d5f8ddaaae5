"""Instance files: schema, validation and family construction."""

from __future__ import annotations

import json
import math
from importlib import resources
from pathlib import Path
from typing import Union

import jsonschema

from .errors import InstanceError
from .families import FiniteFamily, FunctionFamily, named_family, NAMED_FAMILIES
from .scalar import BUILTIN_NAMES, ScalarFamily, builtin, parse_builtin
from .solvers import PointCloud

SCHEMA_VERSION = 1

_num = {"anyOf": [{"type": "number"}, {"enum": ["inf", "-inf"]}]}
_vec = {"anyOf": [{"type": "number"}, {"type": "array", "items": {"type": "number"}, "minItems": 1}]}
_rows = {"type": "array", "items": {"type": "array", "items": {"type": "number"}, "minItems": 2},
         "minItems": 1}
_p = {"type": "number", "minimum": 1}


def _obj(props: dict, required=()) -> dict:
    return {"type": "object", "properties": props, "required": list(required),
            "additionalProperties": False}


def _kind(name: str, props: dict, required=()) -> dict:
    return _obj(dict(kind={"const": name}, **props), ["kind", *required])


FAMILY_SCHEMA = {"oneOf": [
    _kind("scalar", {"terms": {"type": "array", "items": _num, "minItems": 1}}, ["terms"]),
    _kind("scalar_gen", {"formula": {"type": "string"},
                         "tail": {"type": ["string", "null"]}}, ["formula"]),
    _kind("affine", {"rows": _rows}, ["rows"]),
    _kind("hinge", {"rows": _rows, "p": _p}, ["rows"]),
    _kind("power", {"rows": _rows, "p": _p}, ["rows"]),
    _kind("cloud", {"points": {"type": "array", "minItems": 1,
                               "items": {"type": "array", "items": {"type": "number"},
                                         "minItems": 2, "maxItems": 2}},
                    "p": _p}, ["points"]),
    _kind("constants", {"values": {"type": "array", "items": {"type": "number"}, "minItems": 1},
                        "dim": {"type": "integer", "minimum": 1}}, ["values"]),
    _kind("named", {"name": {"enum": sorted(NAMED_FAMILIES)},
                    "params": _obj({"p": _p, "dim": {"type": "integer", "minimum": 1}})},
          ["name"]),
]}

_eps = {"type": "number", "minimum": 0}
_card = {"type": "integer", "minimum": 1}
CERTIFY_SETS = ["subdiff", "M", "N", "Pi", "Ns", "Pis", "B", "S", "T",
                "theorem1", "theorem2", "theorem3", "theorem4", "lemma10",
                "closed_convex_regarding", "lemma7", "convexity"]

_PARAMS = {
    "eval-scalar": _obj({}),
    "eval": _obj({"x": _vec}, ["x"]),
    "conjugate": _obj({"xstar": _vec}, ["xstar"]),
    "phi": _obj({"xstar": _vec, "max_card": _card}, ["xstar"]),
    "gap": _obj({"xstar": _vec, "max_card": _card}, ["xstar"]),
    "certify": _obj({
        "set": {"enum": CERTIFY_SETS},
        "x": _vec, "xstar": _vec, "eps": _eps, "alpha": _eps,
        "J": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
        "parts": {"type": "array", "items": _vec},
        "eps_grid": {"type": "array", "items": _eps},
        "x_sample": {"type": "array", "items": _vec},
        "xstar_sample": {"type": "array", "items": _vec},
        "max_card": _card,
        "window": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
    }, ["set"]),
    "regress": _obj({"p": _p, "init": _vec, "step": {"enum": ["auto", "diminishing", "polyak"]}}),
    "approx": _obj({"p": _p, "init": _vec, "step": {"enum": ["auto", "diminishing", "polyak"]}}),
    "sweep": _obj({"xstar_grid": {"type": "array", "items": _vec}, "max_card": _card},
                  ["xstar_grid"]),
}
OPS = tuple(_PARAMS)

INSTANCE_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    **_obj({
        "version": {"const": SCHEMA_VERSION},
        "name": {"type": "string"},
        "description": {"type": "string"},
        "family": FAMILY_SCHEMA,
        "queries": {"type": "array", "items": {"oneOf": [
            _obj({"op": {"const": op}, "params": schema}, ["op"]) for op, schema in _PARAMS.items()
        ]}},
    }, ["version", "family"]),
}

_VALIDATOR = jsonschema.Draft202012Validator(INSTANCE_SCHEMA)


def _pointer(path) -> str:
    return "/" + "/".join(str(p) for p in path) if path else "/"


def validate(doc: dict) -> None:
    """Raise :class:`InstanceError` at the JSON pointer of the first problem."""
    err = jsonschema.exceptions.best_match(_VALIDATOR.iter_errors(doc))
    if err is None:
        _check_semantics(doc)
        return
    # oneOf failures point at the container; descend into the branch whose
    # discriminator ("kind" or "op") matched, else the best match
    while err.context:
        err = jsonschema.exceptions.best_match(_matching_branch(err.context))
    raise InstanceError(err.message, _pointer(err.absolute_path))


_DISCRIMINATORS = ("kind", "op")


def _matching_branch(errors) -> list:
    branches = {}
    for e in errors:
        branches.setdefault(e.schema_path[0], []).append(e)
    alive = [errs for errs in branches.values()
             if not any(e.validator == "const" and len(e.relative_path) == 1
                        and e.relative_path[0] in _DISCRIMINATORS for e in errs)]
    return alive[0] if len(alive) == 1 else list(errors)


def _check_semantics(doc: dict) -> None:
    fam = doc["family"]
    if fam["kind"] == "scalar_gen":
        try:
            parse_builtin(fam["formula"])
        except KeyError:
            raise InstanceError(f"unknown formula; known: {', '.join(BUILTIN_NAMES)}",
                                "/family/formula") from None
    if fam["kind"] in ("affine", "hinge", "power"):
        widths = {len(r) for r in fam["rows"]}
        if len(widths) != 1:
            raise InstanceError("rows must all have the same length", "/family/rows")


def _float(v) -> float:
    return math.inf if v == "inf" else -math.inf if v == "-inf" else float(v)


def build_family(desc: dict) -> Union[ScalarFamily, FunctionFamily]:
    """Family (scalar or function) described by a validated descriptor."""
    kind = desc["kind"]
    if kind == "scalar":
        return ScalarFamily.finite([_float(v) for v in desc["terms"]], name="scalar")
    if kind == "scalar_gen":
        return builtin(desc["formula"], desc.get("tail", "same"))
    if kind == "affine":
        fam = FiniteFamily.affine(desc["rows"], name="affine")
    elif kind == "hinge":
        fam = FiniteFamily.hinge(desc["rows"], desc.get("p", 1.0), name="hinge")
    elif kind == "power":
        fam = FiniteFamily.power(desc["rows"], desc.get("p", 2.0), name="power")
    elif kind == "cloud":
        fam = PointCloud(points=desc["points"]).family(desc.get("p", 2.0))
    elif kind == "constants":
        fam = FiniteFamily.constants(desc["values"], desc.get("dim", 1), name="constants")
    else:
        fam = named_family(desc["name"], **desc.get("params", {}))
    fam.descriptor = desc
    return fam


def fixture_names() -> list:
    return sorted(p.name[:-5] for p in resources.files("robustsum").joinpath("fixtures").iterdir()
                  if p.name.endswith(".json"))


def fixture_text(name: str) -> str:
    if not name.endswith(".json"):
        name += ".json"
    return resources.files("robustsum").joinpath("fixtures", name).read_text()


def load_instance(source: Union[str, Path]) -> tuple:
    """Parse and validate an instance from a path or a shipped fixture name.

    Returns ``(document, raw_text)``.
    """
    path = Path(source)
    if path.exists():
        text = path.read_text()
    else:
        stem = path.name[:-5] if path.name.endswith(".json") else path.name
        if stem not in fixture_names():
            raise InstanceError(f"no such instance file: {source}", "/")
        text = fixture_text(stem)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceError(f"invalid JSON: {exc.msg} at line {exc.lineno}", "/") from None
    validate(doc)
    return doc, text
