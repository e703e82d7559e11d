"""Run configuration: a JSON file of flat dotted keys, validated with
field-level diagnostics.

Example::

    {
      "kind": "solve-system",
      "params.lambda": [1.0, 1.5],
      "params.mu": [1.0, 1.0],
      "params.beta_upper": [0.05],
      "nodal.counts": [1, 2],
      "integrator.rel_tol": 1e-10
    }

Nested objects are accepted and flattened, so ``{"params": {"mu": [1]}}``
equals ``{"params.mu": [1]}``.  Matrices are given as their strict upper
triangle, row by row.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from .model import Geometry, NodalProfile, SystemParams
from .ode import IntegratorConfig

KINDS = ("solve-scalar", "solve-system", "continue-beta", "check-nondegeneracy",
         "uniqueness-sweep", "liouville-sweep", "apriori-sweep", "transform-check")

_NUM = (int, float)


def _is_num(v):
    return isinstance(v, _NUM) and not isinstance(v, bool)


def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _num_list(v):
    return isinstance(v, list) and all(_is_num(x) for x in v)


def _int_list(v):
    return isinstance(v, list) and all(_is_int(x) and x >= 0 for x in v)


def _grid(v):
    return isinstance(v, list) and len(v) > 0 and all(_is_num(x) or _num_list(x) for x in v)


def _box(v):
    return isinstance(v, list) and all(_num_list(b) and len(b) == 2 and b[0] < b[1] for b in v)


# key -> (check, description, default)
SCHEMA: dict[str, tuple] = {
    "kind": (lambda v: v in KINDS, f"one of {', '.join(KINDS)}", None),
    "seed": (_is_int, "integer", 0),
    "jobs": (lambda v: _is_int(v) and v >= 1, "integer >= 1", 1),
    "output.dir": (lambda v: isinstance(v, str), "string", "out"),
    "params.lambda": (_num_list, "list of numbers", None),
    "params.mu": (_num_list, "list of numbers", None),
    "params.beta_upper": (_num_list, "list of numbers (strict upper triangle)", None),
    "params.geometry": (lambda v: v in [g.value for g in Geometry], "geometry name", "ball3d"),
    "nodal.counts": (_int_list, "list of non-negative integers", None),
    "scalar.lambdas": (_num_list, "list of numbers", [1.0]),
    "scalar.mu": (lambda v: _is_num(v) and v > 0, "number > 0", 1.0),
    "scalar.P": (_int_list, "list of non-negative integers", [0]),
    "solve.amplitudes": (_num_list, "list of numbers", None),
    "continuation.target_beta_upper": (_num_list, "list of numbers", None),
    "continuation.max_step": (lambda v: _is_num(v) and 0 < v <= 1, "number in (0, 1]", 0.25),
    "sweep.launches": (lambda v: _is_int(v) and v >= 1, "integer >= 1", 200),
    "sweep.box": (_box, "list of [low, high] pairs", None),
    "sweep.cluster_radius": (lambda v: _is_num(v) and v > 0, "number > 0", 1e-6),
    "sweep.beta_grid": (_grid, "non-empty list of numbers or upper-triangle lists", None),
    "liouville.points": (lambda v: _is_int(v) and v >= 1, "integer >= 1", 50),
    "liouville.low": (lambda v: _is_num(v) and v > 0, "number > 0", 1e-2),
    "liouville.high": (lambda v: _is_num(v) and v > 0, "number > 0", 1e2),
    "liouville.R_max": (lambda v: _is_num(v) and v > 0, "number > 0", 300.0),
    "liouville.threshold": (lambda v: _is_num(v) and v > 0, "number > 0", 1e6),
    "liouville.geometries": (lambda v: isinstance(v, list) and all(
        g in ("entire3d", "line", "halfline") for g in v), "subset of entire3d/line/halfline",
        ["entire3d", "line", "halfline"]),
    "liouville.include_zero": (lambda v: isinstance(v, bool), "boolean", True),
}
for _f in dataclasses.fields(IntegratorConfig):
    SCHEMA[f"integrator.{_f.name}"] = (
        (lambda v: _is_int(v) and v >= 0, "integer >= 0", _f.default) if _f.type in ("int", int)
        else (lambda v: _is_num(v) and v > 0, "number > 0", _f.default))

REQUIRED = {
    "solve-system": ("params.lambda", "params.mu", "nodal.counts"),
    "continue-beta": ("params.lambda", "params.mu", "nodal.counts", "continuation.target_beta_upper"),
    "uniqueness-sweep": ("params.lambda", "params.mu", "nodal.counts"),
    "liouville-sweep": ("params.mu", "nodal.counts", "sweep.beta_grid"),
    "apriori-sweep": ("params.lambda", "params.mu", "nodal.counts", "sweep.beta_grid"),
}


class ConfigError(ValueError):
    def __init__(self, errors: list):
        self.errors = errors
        super().__init__("; ".join(f"{e['field']}: {e['message']}" for e in errors))


def flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(flatten(v, key + "."))
        else:
            out[key] = v
    return out


@dataclass
class RunConfig:
    kind: str
    values: dict
    params: Optional[SystemParams] = None
    profile: Optional[NodalProfile] = None
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)

    def __getitem__(self, key: str) -> Any:
        return self.values[key]

    @property
    def seed(self) -> int:
        return self.values["seed"]

    @property
    def out_dir(self) -> str:
        return self.values["output.dir"]

    def canonical(self) -> dict:
        """The fully defaulted flat mapping that the config hash covers
        (output location and worker count excluded: they do not change results)."""
        return {k: v for k, v in self.values.items() if k not in ("output.dir", "jobs")}


def _params_from(values, errors):
    lam, mu = values.get("params.lambda"), values.get("params.mu")
    if mu is None:
        return None
    n = len(mu)
    upper = values.get("params.beta_upper")
    if upper is None:
        upper = [0.0] * (n * (n - 1) // 2)
    geom = values.get("params.geometry", "ball3d")
    if lam is None:
        lam = [0.0] * n
    try:
        return SystemParams.from_upper(lam, mu, upper, geom)
    except ValueError as exc:
        msg = str(exc)
        name, _, rest = msg.partition(":")
        key = {"mu": "params.mu", "lambda": "params.lambda", "beta": "params.beta_upper"}.get(
            name.strip(), "params")
        errors.append({"field": key, "message": rest.strip() or msg})
        return None


def validate(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError([{"field": "<root>", "message": "expected a JSON object"}])
    flat = flatten(raw)
    errors = []
    for k in sorted(flat):
        if k not in SCHEMA:
            errors.append({"field": k, "message": "unknown key"})
    values = {}
    for k, (check, desc, default) in SCHEMA.items():
        if k in flat:
            v = flat[k]
            if not check(v):
                errors.append({"field": k, "message": f"expected {desc}, got {v!r}"})
                continue
            values[k] = v
        elif default is not None:
            values[k] = default
    if "kind" not in flat:
        errors.append({"field": "kind", "message": "required"})
    kind = values.get("kind")
    for k in REQUIRED.get(kind, ()):
        if k not in flat:
            errors.append({"field": k, "message": f"required for {kind}"})

    integ = None
    try:
        integ = IntegratorConfig(**{k.split(".", 1)[1]: v for k, v in values.items()
                                    if k.startswith("integrator.")})
    except ValueError as exc:
        errors.append({"field": "integrator", "message": str(exc)})

    params = profile = None
    if kind in REQUIRED:
        if kind == "liouville-sweep" and "params.geometry" not in flat:
            # geometries come from liouville.geometries; params only carry mu and beta
            values["params.geometry"] = "entire3d"
        params = _params_from(values, errors)
        counts = values.get("nodal.counts")
        if params is not None and counts is not None:
            if len(counts) != params.n:
                errors.append({"field": "nodal.counts", "message": f"expected {params.n} entries"})
            else:
                profile = NodalProfile(counts)
        if params is not None:
            n_up = params.n * (params.n - 1) // 2
            for key in ("continuation.target_beta_upper",):
                if key in values and len(values[key]) != n_up:
                    errors.append({"field": key, "message": f"expected {n_up} entries"})
            for g in values.get("sweep.beta_grid", []):
                if isinstance(g, list) and len(g) != n_up:
                    errors.append({"field": "sweep.beta_grid", "message": f"entries need {n_up} values"})
            box = values.get("sweep.box")
            if box is not None and len(box) != params.n:
                errors.append({"field": "sweep.box", "message": f"expected {params.n} intervals"})
            amps = values.get("solve.amplitudes")
            if amps is not None and len(amps) != params.n:
                errors.append({"field": "solve.amplitudes", "message": f"expected {params.n} entries"})
    if kind in ("solve-scalar", "check-nondegeneracy", "transform-check"):
        if any(v <= 0 for v in values.get("scalar.lambdas", [])):
            errors.append({"field": "scalar.lambdas", "message": "entries must be > 0"})
    if values.get("liouville.low", 1) >= values.get("liouville.high", 2):
        errors.append({"field": "liouville.low", "message": "must be below liouville.high"})
    if errors:
        raise ConfigError(errors)
    return RunConfig(kind, values, params, profile, integ)


def load_config(path, overrides: Optional[dict] = None) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError([{"field": "<file>", "message": f"not found: {path}"}])
    except json.JSONDecodeError as exc:
        raise ConfigError([{"field": "<file>", "message": f"invalid JSON: {exc}"}])
    if overrides and isinstance(raw, dict):
        raw = {**flatten(raw), **overrides}
    return validate(raw)
