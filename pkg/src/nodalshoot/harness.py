"""Experiment dispatch, output writing with manifests, and golden regression."""
from __future__ import annotations

import dataclasses
import datetime as _dt
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import __version__, io
from .config import ConfigError, RunConfig, validate
from .liouville import apriori_sweep, liouville_sweep, shooting_grid
from .model import Geometry, SystemParams
from .scalar import find_amplitude, nondegeneracy_scalar, tanaka_transform
from .system import (bump_l4_diagnostic, continue_in_beta, linearized_boundary_map,
                     newton_refine, scalar_seeds, uniqueness_sweep)


@dataclass
class Outcome:
    files: dict = field(default_factory=dict)  # name -> text
    summary: dict = field(default_factory=dict)


def _tag(lam, P):
    return f"lam{lam:g}_P{P}"


def _upper_to_matrix(n, upper):
    m = np.zeros((n, n))
    m[np.triu_indices(n, 1)] = upper
    return m + m.T


def _scalar_cases(cfg: RunConfig):
    mu = float(cfg["scalar.mu"])
    for lam in cfg["scalar.lambdas"]:
        for P in cfg["scalar.P"]:
            yield float(lam), mu, int(P), find_amplitude(float(lam), mu, int(P), cfg.integrator)


def _solve_scalar(cfg, chash):
    out = Outcome(summary={"cases": []})
    rows = []
    for lam, mu, P, rec in _scalar_cases(cfg):
        tag = _tag(lam, P)
        d = io.record_dict(rec)
        out.files[f"record_{tag}.json"] = io.dumps({**d, "config_hash": chash, "seed": cfg.seed})
        out.files[f"profile_{tag}.csv"] = io.profile_csv(rec.profile, chash)
        rows.append((lam, mu, P, rec.amplitudes[0], rec.boundary_residual, rec.ode_residual, rec.energy))
        out.summary["cases"].append({"lambda": lam, "mu": mu, "P": P, "amplitudes": list(rec.amplitudes),
                                     "nodal_counts": list(rec.nodal_counts),
                                     "boundary_residual": rec.boundary_residual, "energy": rec.energy})
    out.files["amplitudes.csv"] = io.csv_table(
        ["lambda", "mu", "P", "amplitude", "boundary_residual", "ode_residual", "energy"], rows, chash)
    return out


def _check_nondegeneracy(cfg, chash):
    out = Outcome(summary={"cases": []})
    rows = []
    for lam, mu, P, rec in _scalar_cases(cfg):
        nd = nondegeneracy_scalar(lam, mu, rec, cfg.integrator)
        rows.append((lam, mu, P, rec.amplitudes[0], nd.z_T, nd.v_1, nd.nondegenerate))
        case = {"lambda": lam, "mu": mu, "P": P, "amplitudes": list(rec.amplitudes),
                "z_T": nd.z_T, "v_1": nd.v_1, "nondegenerate": nd.nondegenerate}
        out.files[f"nondegeneracy_{_tag(lam, P)}.json"] = io.dumps(
            {**case, "z_sup": nd.z_sup, "v_sup": nd.v_sup, "config_hash": chash, "seed": cfg.seed})
        out.summary["cases"].append(case)
    out.files["nondegeneracy.csv"] = io.csv_table(
        ["lambda", "mu", "P", "amplitude", "z_T", "v_1", "nondegenerate"], rows, chash)
    return out


def _transform_check(cfg, chash):
    out = Outcome(summary={"cases": []})
    rows = []
    for lam, mu, P, rec in _scalar_cases(cfg):
        tp = tanaka_transform(lam, mu, rec, config=cfg.integrator)
        gap = float(np.max(np.abs(tp.dy_dt_chain[1:] - tp.dy_dt_bracket[1:])))
        rows.append((lam, mu, P, tp.T, tp.residual, tp.roundtrip_error, gap))
        out.summary["cases"].append({"lambda": lam, "mu": mu, "P": P, "T": tp.T,
                                     "amplitudes": list(rec.amplitudes),
                                     # finite-difference noise level: regress the bound, not the value
                                     "transform_residual_below_1e-6": bool(tp.residual <= 1e-6),
                                     "roundtrip_residual": tp.roundtrip_error})
    out.files["transform.csv"] = io.csv_table(
        ["lambda", "mu", "P", "T", "residual", "roundtrip_error", "dydt_discrepancy"], rows, chash)
    return out


def _bumps_csv(params, rec, chash):
    rows = [(b.component + 1, b.index, b.l4_norm, b.h1_quotient) for b in bump_l4_diagnostic(params, rec)]
    return io.csv_table(["component", "bump", "l4_norm", "h1_quotient"], rows, chash)


def _solve_system(cfg, chash):
    params = cfg.params
    seed = cfg.values.get("solve.amplitudes")
    if seed is None:
        seed = scalar_seeds(params, cfg.profile, cfg.integrator)
    rec = newton_refine(params, seed, cfg.integrator)
    bm = linearized_boundary_map(params, rec, cfg.integrator)
    d = {**io.record_dict(rec), "det_L": bm.det, "nondegenerate": bm.nondegenerate}
    out = Outcome(summary={"amplitudes": list(rec.amplitudes), "nodal_counts": list(rec.nodal_counts),
                           "boundary_residual": rec.boundary_residual, "energy": rec.energy,
                           "nondegenerate": bm.nondegenerate})
    out.files["record.json"] = io.dumps({**d, "config_hash": chash, "seed": cfg.seed})
    out.files["profile.csv"] = io.profile_csv(rec.profile, chash)
    out.files["bumps.csv"] = _bumps_csv(params, rec, chash)
    return out


def _continue_beta(cfg, chash):
    params = cfg.params
    target = _upper_to_matrix(params.n, cfg["continuation.target_beta_upper"])
    path = continue_in_beta(params, target, cfg.profile, cfg.integrator,
                            max_step=cfg["continuation.max_step"])
    iu = np.triu_indices(params.n, 1)
    header = (["step", "s"] + [f"beta_{i + 1}{j + 1}" for i, j in zip(*iu)]
              + [f"a_{j + 1}" for j in range(params.n)]
              + ["boundary_residual", "ode_residual", "det_L", "nondegenerate", "energy"])
    accepted = [e for e in path.step_log if e["accepted"]]
    rows = []
    for k, (beta, rec, bm, e) in enumerate(zip(path.beta_path, path.records, path.determinants, accepted)):
        rows.append([k, e["s"], *beta[iu], *rec.amplitudes, rec.boundary_residual, rec.ode_residual,
                     bm.det, bm.nondegenerate, rec.energy])
    last = path.records[-1]
    out = Outcome(summary={"completed": path.completed, "steps": len(path.records),
                           "amplitudes": list(last.amplitudes), "nodal_counts": list(last.nodal_counts),
                           "boundary_residual": last.boundary_residual, "energy": last.energy,
                           "all_nondegenerate": all(d.nondegenerate for d in path.determinants)})
    out.files["continuation.csv"] = io.csv_table(header, rows, chash)
    out.files["bumps.csv"] = _bumps_csv(last.params, last, chash)
    out.files["path.json"] = io.dumps({"config_hash": chash, "seed": cfg.seed, "step_log": path.step_log,
                                       "completed": path.completed, "max_abs_beta": path.max_abs_beta,
                                       "final": io.record_dict(last)})
    return out


def _uniqueness(cfg, chash, jobs):
    rep = uniqueness_sweep(cfg.params, cfg.profile, cfg["sweep.launches"], cfg.values.get("sweep.box"),
                           cfg["sweep.cluster_radius"], cfg.seed, cfg.integrator, jobs)
    out = Outcome(summary={"verdict": rep.verdict, "n_clusters": len(rep.clusters),
                           "amplitudes": [list(c.amplitudes) for c in rep.clusters],
                           "max_boundary_residual": rep.max_boundary_residual})
    out.files["uniqueness.json"] = io.dumps({**rep.to_dict(), "config_hash": chash,
                                             "params": cfg.params.to_dict()})
    return out


def _liouville(cfg, chash, jobs):
    n = cfg.params.n
    grid = [b if not isinstance(b, list) else _upper_to_matrix(n, b) for b in cfg["sweep.beta_grid"]]
    pts = shooting_grid(cfg["liouville.points"], n, cfg["liouville.low"], cfg["liouville.high"], cfg.seed)
    rep = liouville_sweep(cfg.params.mu, grid, pts, cfg.profile, cfg["liouville.R_max"],
                          [Geometry(g) for g in cfg["liouville.geometries"]], cfg["liouville.threshold"],
                          cfg.integrator, cfg["liouville.include_zero"], jobs)
    counts = rep.counts()
    rows = []
    verdicts = {}
    for (beta, geom), c in counts.items():
        key = f"{beta}|{geom}"
        verdicts[key] = {v: int(c.get(v, 0)) for v in ("oscillates", "blows_up", "undecided", "trivial")}
        rows.append([beta if not isinstance(beta, tuple) else " ".join(map(io.fmt_float, beta)), geom,
                     *verdicts[key].values()])
    out = Outcome(summary={"verdict_counts": verdicts, "undecided_nontrivial": rep.undecided_nontrivial})
    out.files["verdicts.csv"] = io.csv_table(["beta", "geometry", "oscillates", "blows_up", "undecided",
                                              "trivial"], rows, chash)
    out.files["trajectories.json"] = io.dumps({
        "config_hash": chash, "seed": cfg.seed, "R_max": rep.R_max,
        "undecided_nontrivial": rep.undecided_nontrivial,
        "rows": [{"beta": b, "geometry": g, **c.to_dict()} for b, g, c in rep.rows]})
    return out


def _apriori(cfg, chash):
    n = cfg.params.n
    grid = [b if not isinstance(b, list) else _upper_to_matrix(n, b) for b in cfg["sweep.beta_grid"]]
    tab = apriori_sweep(cfg.params, grid, cfg.profile, cfg.integrator)
    rows = [[r.beta if not isinstance(r.beta, tuple) else " ".join(map(io.fmt_float, r.beta)),
             r.sup_norm, r.boundary_residual, r.ode_residual, r.reachable] for r in tab.rows]
    out = Outcome(summary={"sup_norms": [r.sup_norm for r in tab.rows],
                           "amplitudes": [None if r.amplitudes is None else list(r.amplitudes)
                                          for r in tab.rows],
                           "all_finite": tab.all_finite, "ratio": tab.ratio})
    out.files["apriori.csv"] = io.csv_table(["beta", "sup_norm", "boundary_residual", "ode_residual",
                                             "reachable"], rows, chash)
    out.files["apriori.json"] = io.dumps({"config_hash": chash, "seed": cfg.seed,
                                          "empirical_C": tab.empirical_C, "ratio": tab.ratio,
                                          "rows": [r.to_dict() for r in tab.rows]})
    return out


def execute(cfg: RunConfig, jobs: int = 1) -> Outcome:
    chash = io.config_hash(cfg.canonical())
    kind = cfg.kind
    if kind == "solve-scalar":
        return _solve_scalar(cfg, chash)
    if kind == "check-nondegeneracy":
        return _check_nondegeneracy(cfg, chash)
    if kind == "transform-check":
        return _transform_check(cfg, chash)
    if kind == "solve-system":
        return _solve_system(cfg, chash)
    if kind == "continue-beta":
        return _continue_beta(cfg, chash)
    if kind == "uniqueness-sweep":
        return _uniqueness(cfg, chash, jobs)
    if kind == "liouville-sweep":
        return _liouville(cfg, chash, jobs)
    if kind == "apriori-sweep":
        return _apriori(cfg, chash)
    raise ConfigError([{"field": "kind", "message": f"unsupported kind {kind!r}"}])


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def write_outputs(out_dir, files: dict, manifest_extra: dict) -> dict:
    """Write files, then the manifest last."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    checksums = {}
    for name in sorted(files):
        data = files[name].encode()
        (out / name).write_bytes(data)
        checksums[name] = io.sha256(data)
    manifest = {**manifest_extra, "tool_version": __version__, "checksums": checksums,
                "end": _now()}
    (out / "manifest.json").write_text(io.dumps(manifest))
    return manifest


def run(cfg: RunConfig, out_dir: Optional[str] = None, jobs: int = 1) -> int:
    """Run one experiment; 0 on success, 1 on solver failure (error.json written)."""
    out_dir = out_dir or cfg.out_dir
    chash = io.config_hash(cfg.canonical())
    start = _now()
    try:
        outcome = execute(cfg, jobs)
    except ConfigError:
        raise
    except Exception as exc:  # solver failures become a machine-readable record
        err = {"status": 1, "kind": cfg.kind, "error": type(exc).__name__, "message": str(exc),
               "config_hash": chash, "seed": cfg.seed}
        write_outputs(out_dir, {"error.json": io.dumps(err)},
                      {"config_hash": chash, "start": start, "status": 1})
        return 1
    write_outputs(out_dir, outcome.files, {"config_hash": chash, "start": start, "status": 0,
                                           "kind": cfg.kind, "seed": cfg.seed})
    return 0


# --- golden regression -----------------------------------------------------------

AMPLITUDE_ATOL = 1e-8
RESIDUAL_ATOL = 1e-8
OTHER_RTOL = 1e-6


def _tolerance_for(key: str) -> Callable[[float, float], bool]:
    if "amplitude" in key:
        return lambda a, b: abs(a - b) <= AMPLITUDE_ATOL
    if "residual" in key:
        return lambda a, b: abs(a - b) <= RESIDUAL_ATOL
    return lambda a, b: abs(a - b) <= OTHER_RTOL * max(abs(a), abs(b), 1e-300)


def compare(expected, actual, key: str = "", path: str = "") -> list:
    """Field-by-field comparison; returns a list of mismatch descriptions."""
    here = path or "<root>"
    if isinstance(expected, dict):
        if not isinstance(actual, dict):
            return [f"{here}: expected object"]
        bad = []
        for k in expected:
            if k not in actual:
                bad.append(f"{path}.{k}: missing")
            else:
                bad += compare(expected[k], actual[k], k, f"{path}.{k}" if path else k)
        return bad
    if isinstance(expected, list):
        if not isinstance(actual, list) or len(actual) != len(expected):
            return [f"{here}: length {len(actual) if isinstance(actual, list) else '?'} != {len(expected)}"]
        bad = []
        for i, (e, a) in enumerate(zip(expected, actual)):
            bad += compare(e, a, key, f"{path}[{i}]")
        return bad
    if isinstance(expected, bool) or isinstance(expected, (int, str)) or expected is None:
        if isinstance(expected, int) and not isinstance(expected, bool) and isinstance(actual, float) \
                and not float(actual).is_integer():
            return [f"{here}: {actual!r} != {expected!r}"]
        return [] if expected == actual else [f"{here}: {actual!r} != {expected!r}"]
    if isinstance(expected, float):
        if not isinstance(actual, (int, float)) or isinstance(actual, bool):
            return [f"{here}: expected number"]
        if math.isnan(expected) and math.isnan(actual):
            return []
        return [] if _tolerance_for(key)(expected, actual) else [f"{here}: {actual!r} vs golden {expected!r}"]
    return [f"{here}: unsupported golden value"]


def golden_dir() -> Path:
    return Path(str(resources.files("nodalshoot") / "goldens"))


def _normalise(obj):
    return json.loads(io.dumps(obj))


@dataclass
class RegressResult:
    name: str
    passed: bool
    problems: list

    def to_dict(self):
        return {"name": self.name, "passed": self.passed, "problems": self.problems}


def make_golden(raw_config: dict) -> dict:
    cfg = validate(raw_config)
    return {"config": raw_config, "expected": _normalise(execute(cfg).summary)}


def regress(directory=None, integrator_overrides: Optional[dict] = None, names=None) -> list:
    """Recompute each golden experiment and compare its summary.

    ``integrator_overrides`` (e.g. ``{"rel_tol": 1e-6}``) perturb the solver
    configuration to check that results are tolerance-robust.
    """
    directory = Path(directory) if directory else golden_dir()
    files = sorted(directory.glob("*.json"))
    if not files:
        return [RegressResult(str(directory), False, ["missing golden files: directory is empty"])]
    results = []
    for path in files:
        if names and path.stem not in names:
            continue
        try:
            golden = json.loads(path.read_text())
            raw, expected = dict(golden["config"]), golden["expected"]
            if integrator_overrides:
                raw.update({f"integrator.{k}": v for k, v in integrator_overrides.items()})
            actual = _normalise(execute(validate(raw)).summary)
        except (json.JSONDecodeError, KeyError, TypeError, ConfigError) as exc:
            results.append(RegressResult(path.name, False, [f"corrupted golden {path.name}: {exc}"]))
            continue
        except Exception as exc:
            results.append(RegressResult(path.name, False, [f"{type(exc).__name__}: {exc}"]))
            continue
        problems = compare(expected, actual)
        results.append(RegressResult(path.name, not problems, problems))
    return results
