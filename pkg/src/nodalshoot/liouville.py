"""Classification of entire-space trajectories (oscillates / blows up /
undecided) and sweeps over couplings and shooting data, plus the a priori
sup-norm sweep on the ball."""
from __future__ import annotations

import dataclasses
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.stats import qmc

from .model import Geometry, NodalProfile, SystemParams
from .ode import IntegratorConfig, IntegrationError, shoot
from .system import ContinuationStalled, continue_in_beta

OSCILLATES = "oscillates"
BLOWS_UP = "blows_up"
UNDECIDED = "undecided"

DEFAULT_R_MAX = 300.0
DEFAULT_THRESHOLD = 1e6


@dataclass
class Classification:
    data: np.ndarray
    verdict: str
    node_counts: tuple
    escape_radius: Optional[float]
    horizon: float
    trivial: bool = False

    def to_dict(self) -> dict:
        return {"data": [float(x) for x in self.data], "verdict": self.verdict,
                "node_counts": list(self.node_counts), "escape_radius": self.escape_radius,
                "horizon": self.horizon, "trivial": self.trivial}


def _entire_config(config: Optional[IntegratorConfig], R_max: float, threshold: float):
    config = config or IntegratorConfig()
    return dataclasses.replace(config, r_max=float(R_max), blowup_threshold=float(threshold),
                               max_step=max(config.max_step, R_max / 1000.0))


def classify_entire(params: SystemParams, data, P, R_max: float = DEFAULT_R_MAX,
                    threshold: float = DEFAULT_THRESHOLD,
                    config: Optional[IntegratorConfig] = None) -> Classification:
    """Integrate an entire-space trajectory to ``R_max`` and classify it.

    ``data`` are amplitudes at the symmetry point for entire3d/line and
    slopes at 0 for halfline.  Nodes are counted on [0, R_max]; the run stops
    as soon as some component exceeds its count in ``P``.
    """
    if params.geometry is Geometry.BALL3D:
        raise ValueError("classify_entire needs an entire-space geometry")
    counts_p = np.asarray(P.counts if isinstance(P, NodalProfile) else P, dtype=np.int64)
    data = np.atleast_1d(np.asarray(data, dtype=float))
    if not np.any(data):
        return Classification(data, UNDECIDED, (0,) * params.n, None, float(R_max), trivial=True)
    cfg = _entire_config(config, R_max, threshold)
    try:
        res = shoot(params, cfg, data, n_samples=0, stop_counts=counts_p)
    except IntegrationError as exc:
        r_fail = float(str(exc).rsplit("=", 1)[-1])
        return Classification(data, BLOWS_UP, (0,) * params.n, r_fail, float(R_max))
    counts = tuple(int(c) for c in res.node_counts)
    if res.reason in ("blowup", "nonfinite"):
        verdict = BLOWS_UP
    elif np.any(res.node_counts > counts_p):
        verdict = OSCILLATES
    else:
        verdict = UNDECIDED
    return Classification(data, verdict, counts, res.escape_radius, float(R_max))


def shooting_grid(n_points: int, n_components: int, low: float = 1e-2, high: float = 1e2,
                  seed: int = 0) -> np.ndarray:
    """Nonzero shooting data: log-uniform magnitude in [low, high] and, for
    several components, a direction in the closed positive orthant, both from
    a scrambled Halton sequence."""
    d = max(n_components, 1)
    pts = qmc.Halton(d=d, scramble=True, seed=seed).random(n_points)
    rho = np.exp(np.log(low) + (np.log(high) - np.log(low)) * pts[:, 0])
    if n_components == 1:
        return rho[:, None]
    # spherical angles in [0, π/2]
    ang = 0.5 * np.pi * pts[:, 1:]
    dirs = np.ones((n_points, n_components))
    for k in range(n_components - 1):
        dirs[:, k] *= np.cos(ang[:, k])
        dirs[:, k + 1:] *= np.sin(ang[:, k])[:, None]
    return rho[:, None] * dirs


@dataclass
class LiouvilleReport:
    rows: list = field(default_factory=list)  # (beta12-or-matrix, geometry, Classification)
    R_max: float = DEFAULT_R_MAX

    def counts(self):
        """{(beta key, geometry): Counter of verdicts} with trivial runs counted apart."""
        out = {}
        for beta, geom, c in self.rows:
            key = (beta, geom)
            cnt = out.setdefault(key, Counter())
            cnt["trivial" if c.trivial else c.verdict] += 1
        return out

    @property
    def undecided_nontrivial(self) -> int:
        return sum(1 for _, _, c in self.rows if c.verdict == UNDECIDED and not c.trivial)

    @property
    def trivial(self) -> int:
        return sum(1 for _, _, c in self.rows if c.trivial)


def _beta_matrix(beta, n):
    b = np.asarray(beta, dtype=float)
    if b.ndim == 0:
        m = np.full((n, n), float(b))
        np.fill_diagonal(m, 0.0)
        return m
    return b


def _beta_key(beta):
    b = np.asarray(beta, dtype=float)
    return float(b) if b.ndim == 0 else tuple(map(float, b[np.triu_indices(b.shape[0], 1)]))


def liouville_sweep(mu, beta_grid, shooting, P, R_max: float = DEFAULT_R_MAX,
                    geometries=(Geometry.ENTIRE3D, Geometry.LINE, Geometry.HALFLINE),
                    threshold: float = DEFAULT_THRESHOLD, config: Optional[IntegratorConfig] = None,
                    include_zero: bool = False, jobs: int = 1) -> LiouvilleReport:
    """classify_entire over beta_grid × geometries × shooting data.

    ``beta_grid`` entries are scalars (all off-diagonal couplings equal) or
    full matrices.  ``shooting`` is an array of data vectors, or a mapping
    geometry -> array.
    """
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    n = mu.size
    tasks = []
    for beta in beta_grid:
        bm = _beta_matrix(beta, n)
        for geom in geometries:
            geom = Geometry(geom)
            params = SystemParams(np.zeros(n), mu, bm, geom)
            pts = shooting[geom] if isinstance(shooting, dict) else shooting
            pts = [np.asarray(p, dtype=float) for p in pts]
            if include_zero:
                pts = [np.zeros(n)] + pts
            tasks += [(_beta_key(beta), geom.value, params, p) for p in pts]

    def run(task):
        key, g, params, p = task
        return key, g, classify_entire(params, p, P, R_max, threshold, config)

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            rows = list(pool.map(run, tasks))
    else:
        rows = [run(t) for t in tasks]
    return LiouvilleReport(rows, float(R_max))


@dataclass
class AprioriRow:
    beta: object
    sup_norm: float
    boundary_residual: float
    ode_residual: float
    reachable: bool
    amplitudes: Optional[np.ndarray] = None

    def to_dict(self) -> dict:
        return {"beta": self.beta, "sup_norm": self.sup_norm,
                "boundary_residual": self.boundary_residual,
                "ode_residual": self.ode_residual, "reachable": self.reachable,
                "amplitudes": None if self.amplitudes is None else self.amplitudes.tolist()}


@dataclass
class AprioriTable:
    rows: list

    @property
    def empirical_C(self) -> float:
        vals = [r.sup_norm for r in self.rows if r.reachable]
        return float(max(vals)) if vals else float("nan")

    @property
    def ratio(self) -> float:
        vals = [r.sup_norm for r in self.rows if r.reachable]
        return float(max(vals) / min(vals)) if vals else float("nan")

    @property
    def all_finite(self) -> bool:
        return all(r.reachable and np.isfinite(r.sup_norm) for r in self.rows)


def apriori_sweep(base: SystemParams, beta_grid, profile, config: Optional[IntegratorConfig] = None,
                  max_step: float = 0.25, seed_amplitudes=None) -> AprioriTable:
    """For each β, continue from β=0 and record |U|_∞ = max_j sup_r |u_j|."""
    start = base.with_beta(np.zeros_like(base.beta))
    rows = []
    for beta in beta_grid:
        bm = _beta_matrix(beta, base.n)
        try:
            path = continue_in_beta(start, bm, profile, config, max_step=max_step,
                                    seed_amplitudes=seed_amplitudes)
        except ContinuationStalled:
            rows.append(AprioriRow(_beta_key(beta), float("nan"), float("nan"), float("nan"), False))
            continue
        rec = path.records[-1]
        rows.append(AprioriRow(_beta_key(beta), float(np.max(rec.profile.sup_norms())),
                               rec.boundary_residual, rec.ode_residual, True, rec.amplitudes))
    return AprioriTable(rows)
