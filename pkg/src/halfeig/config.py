"""Problem configuration: a single JSON document, schema-checked, with expressions as strings."""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path

import jsonschema
from jsonschema.exceptions import best_match
import numpy as np

from .expr import ExprError, parse_expr
from .mesh import Domain, Grid, build_grid, disk, interval, rectangle
from .operator import (EXAMPLE_4_2_DRIFT, BellmanOperator, EllipticityParams, example_4_2,
                       example_4_3, linear_operator, pucci_minus)


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending field path."""


_NUM = {"type": "number"}
_EXPR = {"type": ["string", "number"]}
_POS = {"type": "number", "exclusiveMinimum": 0}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "halfeig problem",
    "type": "object",
    "additionalProperties": False,
    "required": ["operator"],
    "properties": {
        "domain": {
            "oneOf": [
                {"type": "object", "additionalProperties": False, "required": ["kind", "a", "b"],
                 "properties": {"kind": {"const": "interval"}, "a": _NUM, "b": _NUM}},
                {"type": "object", "additionalProperties": False,
                 "required": ["kind", "ax", "bx", "ay", "by"],
                 "properties": {"kind": {"const": "rectangle"}, "ax": _NUM, "bx": _NUM,
                                "ay": _NUM, "by": _NUM}},
                {"type": "object", "additionalProperties": False, "required": ["kind"],
                 "properties": {"kind": {"const": "disk"}, "radius": _POS,
                                "center": {"type": "array", "items": _NUM,
                                           "minItems": 2, "maxItems": 2}}},
            ]
        },
        "n": {"type": "integer", "minimum": 4},
        "operator": {
            "oneOf": [
                {"type": "object", "additionalProperties": False, "required": ["builtin"],
                 "properties": {
                     "builtin": {"enum": ["pucci_minus", "pucci_plus", "example_4_2",
                                          "example_4_3"]},
                     "gamma": _POS, "Gamma": _POS,
                     "drift": {"type": "array", "items": _EXPR, "minItems": 2, "maxItems": 2},
                 }},
                {"type": "object", "additionalProperties": False,
                 "required": ["members", "params"],
                 "properties": {
                     "mode": {"enum": ["inf", "sup"]},
                     "name": {"type": "string"},
                     "params": {"type": "object", "additionalProperties": False,
                                "required": ["gamma", "Gamma"],
                                "properties": {"gamma": _POS, "Gamma": _POS,
                                               "delta1": {"type": "number", "minimum": 0},
                                               "delta0": {"type": "number", "minimum": 0}}},
                     "members": {"type": "array", "minItems": 1, "items": {
                         "type": "object", "additionalProperties": False, "required": ["a"],
                         "properties": {
                             "a": {"type": "array", "items": _EXPR, "minItems": 1, "maxItems": 2},
                             "b": {"type": "array", "items": _EXPR, "minItems": 1, "maxItems": 2},
                             "c": _EXPR}}},
                 }},
            ]
        },
        "f": _EXPR,
        "h": _EXPR,
        "lambda": _NUM,
        "tolerances": {
            "type": "object", "additionalProperties": False,
            "properties": {k: _POS for k in (
                "lambda_tol", "residual_tol", "solve_residual_tol", "blowup_threshold",
                "class_tol", "gap_tol", "cont_tol", "res_tol", "cert_tol", "identity_tol",
                "tie_tol", "bisect_tol", "dedup_tol")},
        },
        "options": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "trials": {"type": "integer", "minimum": 1},
                "steps": {"type": "integer", "minimum": 2},
                "blowup": {"type": "boolean"},
                "blowup_offsets": {"type": "array", "items": _POS, "minItems": 2},
                "candidates": {"type": "array", "items": {
                    "type": "array", "minItems": 1, "items": {
                        "type": "array", "prefixItems": [_EXPR, {"type": "integer", "minimum": 0}],
                        "minItems": 2, "maxItems": 2}}},
                "sweep": {"type": "object", "additionalProperties": False,
                          "required": ["start", "stop", "num"],
                          "properties": {"start": _NUM, "stop": _NUM,
                                         "num": {"type": "integer", "minimum": 2}}},
                "lambdas": {"type": "array", "items": _NUM, "minItems": 1},
            },
        },
    },
}

# Built-in problems carry their own domain, grid and tolerances.  The disk
# example is only first-order accurate, so its measure tolerances sit at the
# discretization scale.
BUILTIN_DEFAULTS = {
    "example_4_3": {"domain": {"kind": "interval", "a": 0.0, "b": 1.0}, "n": 401},
    "example_4_2": {"domain": {"kind": "disk", "radius": 1.0, "center": [0.0, 0.0]}, "n": 101,
                    "tolerances": {"identity_tol": 1e-2, "cert_tol": 5e-2}},
    "pucci_minus": {"domain": {"kind": "interval", "a": 0.0, "b": 1.0}, "n": 201},
    "pucci_plus": {"domain": {"kind": "interval", "a": 0.0, "b": 1.0}, "n": 201},
}

DEFAULT_TOLERANCES = {
    "lambda_tol": 1e-9,
    "residual_tol": 1e-8,
    "solve_residual_tol": 1e-10,
    "blowup_threshold": 1e8,
    "gap_tol": 1e-3,
    "cont_tol": 1e-6,
    "res_tol": 1e-6,
    "identity_tol": 1e-6,
    "bisect_tol": 3e-2,
    "dedup_tol": 1e-6,
}

DEFAULT_OPTIONS = {"trials": 100, "steps": 12, "blowup": True,
                   "blowup_offsets": [1.0, 0.5, 0.25, 0.125, 0.0625]}


def _path(err) -> str:
    parts = []
    for p in err.absolute_path:
        parts.append(f"[{p}]" if isinstance(p, int) else ("." if parts else "") + str(p))
    return "".join(parts) or "<root>"


def _expr_src(v) -> str:
    return repr(float(v)) if isinstance(v, (int, float)) else str(v)


@dataclass(frozen=True)
class ProblemConfig:
    """Normalized configuration (defaults filled in, numbers as floats)."""

    data: dict

    @classmethod
    def from_dict(cls, raw: dict) -> "ProblemConfig":
        validator = jsonschema.Draft202012Validator(SCHEMA)
        err = best_match(validator.iter_errors(raw))
        if err is not None:
            raise ConfigError(f"{_path(err)}: {err.message}")
        data = copy.deepcopy(raw)
        op = data["operator"]
        base = BUILTIN_DEFAULTS.get(op.get("builtin"), {})
        if "domain" not in data:
            if "domain" not in base:
                raise ConfigError("domain: required for operators given by members")
            data["domain"] = copy.deepcopy(base["domain"])
        if data["domain"]["kind"] == "disk":
            data["domain"].setdefault("radius", 1.0)
            data["domain"].setdefault("center", [0.0, 0.0])
        data.setdefault("n", base.get("n", 101))
        tol = dict(DEFAULT_TOLERANCES)
        tol.update(base.get("tolerances", {}))
        tol.update(data.get("tolerances", {}))
        data["tolerances"] = {k: float(tol[k]) for k in sorted(tol)}
        opts = dict(DEFAULT_OPTIONS)
        opts.update(data.get("options", {}))
        data["options"] = opts
        if op.get("builtin") in ("pucci_minus", "pucci_plus"):
            op.setdefault("gamma", 1.0)
            op.setdefault("Gamma", 1.0)
        if op.get("builtin") == "example_4_2":
            op.setdefault("drift", list(EXAMPLE_4_2_DRIFT))
        if "members" in op:
            op.setdefault("mode", "inf")
            op.setdefault("name", "custom")
            op["params"].setdefault("delta1", 0.0)
            op["params"].setdefault("delta0", 0.0)
        cfg = cls(_canonical(json.loads(json.dumps(data))))
        cfg._check_expressions()
        return cfg

    @classmethod
    def load(cls, path) -> "ProblemConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"<root>: invalid JSON ({exc})") from None
        except OSError as exc:
            raise ConfigError(f"<root>: cannot read config ({exc})") from None
        return cls.from_dict(raw)

    def to_json(self) -> str:
        return json.dumps(self.data, indent=2, sort_keys=True)

    def __getitem__(self, key):
        return self.data[key]

    def get(self, key, default=None):
        return self.data.get(key, default)

    @property
    def tol(self) -> dict:
        return self.data["tolerances"]

    @property
    def options(self) -> dict:
        return self.data["options"]

    def _check_expressions(self):
        fields = [(k, self.data[k]) for k in ("f", "h") if k in self.data]
        op = self.data["operator"]
        for i, m in enumerate(op.get("members", [])):
            for key in ("a", "b"):
                for j, s in enumerate(m.get(key, [])):
                    fields.append((f"operator.members[{i}].{key}[{j}]", s))
            if "c" in m:
                fields.append((f"operator.members[{i}].c", m["c"]))
        for j, s in enumerate(op.get("drift", [])):
            fields.append((f"operator.drift[{j}]", s))
        for i, rules in enumerate(self.options.get("candidates", [])):
            for j, (region, _) in enumerate(rules):
                fields.append((f"options.candidates[{i}][{j}][0]", region))
        for where, src in fields:
            try:
                parse_expr(_expr_src(src))
            except ExprError as exc:
                raise ConfigError(f"{where}: {exc}") from None

    # -------------------------------------------------------------- building

    def domain(self) -> Domain:
        d = self.data["domain"]
        if d["kind"] == "interval":
            return interval(d["a"], d["b"])
        if d["kind"] == "rectangle":
            return rectangle(d["ax"], d["bx"], d["ay"], d["by"])
        return disk(d["radius"], tuple(d["center"]))

    def grid(self) -> Grid:
        return build_grid(self.domain(), self.data["n"])

    def operator(self) -> BellmanOperator:
        op = self.data["operator"]
        dim = self.domain().dim
        name = op.get("builtin")
        if name == "example_4_3":
            return example_4_3(dim)
        if name == "example_4_2":
            return example_4_2(tuple(_expr_src(s) for s in op["drift"]))
        if name in ("pucci_minus", "pucci_plus"):
            p = EllipticityParams(op["gamma"], op["Gamma"])
            base = pucci_minus(p, dim)
            return base if name == "pucci_minus" else BellmanOperator(
                base.family, p, "sup", f"pucci_plus({p.gamma:g},{p.Gamma:g})")
        p = op["params"]
        params = EllipticityParams(p["gamma"], p["Gamma"], p["delta1"], p["delta0"])
        fam = []
        for m in op["members"]:
            a = [_expr_src(s) for s in m["a"]]
            b = [_expr_src(s) for s in m.get("b", ["0"] * len(a))]
            fam.append(linear_operator(a, b, _expr_src(m.get("c", 0.0)), len(a)))
        return BellmanOperator(tuple(fam), params, op["mode"], op["name"])

    def function(self, key: str, grid: Grid, required: bool = True):
        if key not in self.data:
            if required:
                raise ConfigError(f"{key}: required by this command")
            return None
        X = grid.coords.T
        vals = parse_expr(_expr_src(self.data[key]))(*X)
        return np.broadcast_to(vals, (grid.size,)).astype(float)

    def candidates(self):
        return [[(_expr_src(r), int(k)) for r, k in rules]
                for rules in self.options.get("candidates", [])]


def _canonical(obj):
    if isinstance(obj, dict):
        return {k: _canonical(obj[k]) for k in sorted(obj)}
    if isinstance(obj, list):
        return [_canonical(v) for v in obj]
    return obj
