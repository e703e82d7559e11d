"""N-component shooting: Newton refinement of the boundary map, continuation
in the coupling matrix, the linearised boundary-map determinant, bump
diagnostics and multistart uniqueness sweeps."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy.stats import qmc

from . import nodal
from .model import Geometry, NodalProfile, SolutionRecord, SystemParams
from .ode import IntegratorConfig, IntegrationError, integrate_with_sensitivity, shoot
from .scalar import find_amplitude, make_record, verified_shot

NEWTON_TOL = 1e-10
COND_MAX = 1e12


class ShootingError(RuntimeError):
    pass


class DegenerateShootingPoint(ShootingError):
    pass


class NoConvergence(ShootingError):
    pass


class ContinuationStalled(RuntimeError):
    def __init__(self, msg, path=None):
        super().__init__(msg)
        self.path = path

    @property
    def last_record(self):
        return self.path.records[-1] if self.path and self.path.records else None


def normalize_signs(amplitudes) -> np.ndarray:
    """Flip components to a_j >= 0; exact by the odd symmetry in each u_j."""
    return np.abs(np.asarray(amplitudes, dtype=float))


def _boundary(params, config, a):
    res = shoot(params, config, a, n_samples=0)
    if res.reason != "reached_end":
        return None
    return res.final.u.copy()


def _newton_step(J, F):
    cond = np.linalg.cond(J)
    if not np.isfinite(cond) or cond > COND_MAX:
        raise DegenerateShootingPoint(f"degenerate shooting point (cond={cond:.3e})")
    return np.linalg.solve(J, -F)


def _explore(params, config, a, tol, max_iter):
    """Damped Newton at the working tolerance; returns (a, iterations)."""
    for it in range(max_iter + 1):
        try:
            res, J = integrate_with_sensitivity(params, config, a, n_samples=0)
        except IntegrationError as exc:
            raise NoConvergence(f"no convergence: {exc}") from exc
        F = res.final.u
        fnorm = np.max(np.abs(F))
        if fnorm <= tol:
            return a, it
        if it == max_iter:
            break
        step = _newton_step(J, F)
        t = 1.0
        while True:
            trial = a + t * step
            F_new = _boundary(params, config, trial)
            if F_new is not None and np.max(np.abs(F_new)) < (1 - 1e-4 * t) * fnorm:
                a = trial
                break
            t *= 0.5
            if t < 1e-4:
                raise NoConvergence(f"no convergence: line search failed at |F|={fnorm:.3e}")
    raise NoConvergence(f"no convergence after {max_iter} iterations")


def newton_refine(params: SystemParams, a0, config: Optional[IntegratorConfig] = None,
                  tol: float = NEWTON_TOL, max_iter: int = 50, polish: bool = True) -> SolutionRecord:
    """Solve u_j(1; a) = 0 for all j by damped Newton from ``a0``.

    The search runs at the working tolerance down to |F| of order 100·rel_tol;
    the signs are then normalised
    and a few Newton steps are repeated on the verification grid, whose last
    shot becomes the record.  With ``polish=False`` only the amplitudes and
    counts are meaningful (profile-free quick record).
    """
    if params.geometry is not Geometry.BALL3D:
        raise ValueError("newton_refine requires ball3d")
    config = config or IntegratorConfig()
    a = np.atleast_1d(np.asarray(a0, dtype=float)).copy()
    if a.size != params.n or not np.all(np.isfinite(a)):
        raise ValueError("a0 must be finite with one entry per component")

    iters = 0
    if np.any(a != 0):
        # the working-tolerance map is only accurate to about rel_tol; the
        # verification-grid polish below takes it the rest of the way
        explore_tol = tol if not polish else max(tol, 100.0 * config.rel_tol)
        a, iters = _explore(params, config, a, explore_tol, max_iter)
    a = normalize_signs(a)

    if not polish:
        res = shoot(params, config, a, n_samples=0)
        return SolutionRecord(params, a, None, tuple(int(c) for c in res.node_counts),
                              float(np.max(np.abs(res.final.u))), float("nan"), float("nan"),
                              iters, {"polished": False})

    for k in range(6):
        res = verified_shot(params, a, config, sensitivity=True)
        if res.reason != "reached_end":
            raise NoConvergence(f"no convergence: verification shot ended with {res.reason}")
        F = res.final.u
        if np.max(np.abs(F)) <= tol or not np.any(a):
            break
        a = normalize_signs(a + _newton_step(res.final.sensitivity[:params.n], F))
        iters += 1
    else:
        raise NoConvergence(f"no convergence in polish (|F|={np.max(np.abs(F)):.3e})")
    rec = make_record(params, a, res, iterations=iters, meta={"polished": True})
    rec.meta["triviality"] = nodal.classify_triviality(rec.profile).value
    return rec


# --- continuation ---------------------------------------------------------------

class BoundaryMap(NamedTuple):
    L: np.ndarray
    det: float
    nondegenerate: bool


def linearized_boundary_map(params: SystemParams, record: SolutionRecord,
                            config: Optional[IntegratorConfig] = None,
                            rel: float = 1e-4) -> BoundaryMap:
    """L[j, k] = φ_j(1) for the linearisation along the record with
    φ(0) = e_k, φ'(0) = 0; non-degenerate iff |det L| > rel·Π_k |L e_k|."""
    res = verified_shot(params, record.amplitudes, config, sensitivity=True)
    if res.reason != "reached_end":
        raise IntegrationError(f"linearised integration ended early: {res.reason}")
    L = res.final.sensitivity[:params.n].copy()
    det = float(np.linalg.det(L))
    scale = float(np.prod(np.linalg.norm(L, axis=0)))
    return BoundaryMap(L, det, bool(abs(det) > rel * scale))


@dataclass
class ContinuationPath:
    beta_path: list = field(default_factory=list)
    records: list = field(default_factory=list)
    step_log: list = field(default_factory=list)
    determinants: list = field(default_factory=list)
    reached: float = 0.0
    completed: bool = False

    @property
    def max_abs_beta(self) -> float:
        if not self.beta_path:
            return 0.0
        return float(max(np.max(np.abs(b)) for b in self.beta_path))


def scalar_seeds(params: SystemParams, profile: NodalProfile,
                 config: Optional[IntegratorConfig] = None) -> np.ndarray:
    """Per-component scalar amplitudes for the decoupled problem."""
    return np.array([find_amplitude(params.lambda_[j], params.mu[j], int(profile[j]), config)
                     .amplitudes[0] for j in range(params.n)])


def continue_in_beta(params: SystemParams, target_beta, profile: NodalProfile,
                     config: Optional[IntegratorConfig] = None, max_step: float = 0.25,
                     min_step: float = 1e-6, seed_amplitudes=None) -> ContinuationPath:
    """Walk β linearly from ``params.beta`` to ``target_beta`` with Newton at
    each step; a Newton failure or a nodal-count change halves the step."""
    config = config or IntegratorConfig()
    if not isinstance(profile, NodalProfile):
        profile = NodalProfile(profile)
    beta0 = np.array(params.beta)
    beta1 = np.asarray(target_beta, dtype=float)
    if beta1.ndim == 0:
        beta1 = np.array([[0.0, float(beta1)], [float(beta1), 0.0]])
    target_counts = tuple(int(c) for c in profile.counts)

    seed = scalar_seeds(params, profile, config) if seed_amplitudes is None else seed_amplitudes
    path = ContinuationPath()

    def accept(s, beta, rec):
        bm = linearized_boundary_map(rec.params, rec, config)
        path.beta_path.append(beta)
        path.records.append(rec)
        path.determinants.append(bm)
        path.reached = s
        path.step_log.append({"s": s, "accepted": True, "det": bm.det,
                              "nondegenerate": bm.nondegenerate})

    rec0 = newton_refine(params, seed, config)
    if rec0.nodal_counts != target_counts:
        raise ContinuationStalled(f"seed has nodal counts {rec0.nodal_counts}, wanted {target_counts}", path)
    accept(0.0, beta0, rec0)

    if np.array_equal(beta0, beta1):
        path.completed = True
        return path

    s, ds = 0.0, max_step
    prev_a = None
    while s < 1.0:
        ds = min(ds, 1.0 - s)
        s_new = s + ds if s + ds < 1.0 - 1e-12 else 1.0
        beta = beta0 + s_new * (beta1 - beta0)
        a_cur = path.records[-1].amplitudes
        guess = a_cur if prev_a is None else a_cur + (a_cur - prev_a) * (ds / prev_ds)
        try:
            rec = newton_refine(params.with_beta(beta), guess, config)
            ok = rec.nodal_counts == target_counts and np.all(rec.amplitudes > 0)
            why = "" if ok else f"nodal counts {rec.nodal_counts}"
        except (ShootingError, IntegrationError) as exc:
            ok, why = False, str(exc)
        if not ok:
            path.step_log.append({"s": s_new, "accepted": False, "reason": why})
            ds *= 0.5
            if ds < min_step:
                raise ContinuationStalled(f"continuation stalled at s={s:.6g}", path)
            continue
        prev_a, prev_ds = a_cur, ds
        s = s_new
        accept(s, beta, rec)
        ds = min(max_step, 1.5 * ds)
    path.completed = True
    return path


# --- bump diagnostics -------------------------------------------------------------

@dataclass(frozen=True)
class BumpRow:
    component: int
    index: int
    l4_norm: float
    h1_quotient: float


_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


def _piece_integral(poly, a, b, fn):
    knots = poly.x
    edges = np.concatenate([[a], knots[(knots > a) & (knots < b)], [b]])
    lo, hi = edges[:-1], edges[1:]
    half = 0.5 * (hi - lo)
    pts = 0.5 * (lo + hi)[:, None] + half[:, None] * _GL_X[None, :]
    return float(np.sum(half[:, None] * _GL_W[None, :] * fn(pts)))


def bump_l4_diagnostic(params: SystemParams, record: SolutionRecord,
                       zero_tol: float = nodal.DEFAULT_ZERO_TOL) -> list:
    """Per bump w: |w|₄ and (∫|∇w|² + λ_j w²)/|w|₄², radial 3-D measure."""
    rows = []
    prof = record.profile
    for j in range(params.n):
        comp = prof.component(j)
        bumps = nodal.decompose_bumps(comp, zero_tol=zero_tol)
        if not bumps:
            continue
        poly = nodal._interpolant(comp.radii, comp.values[0], comp.derivatives[0])
        dpoly = poly.derivative()
        lam = params.lambda_[j]
        for q, b in enumerate(bumps):
            quad = _piece_integral(poly, b.start, b.end,
                                   lambda x: 4 * np.pi * x ** 2 * (dpoly(x) ** 2 + lam * poly(x) ** 2))
            rows.append(BumpRow(j, q, b.l4_norm, quad / b.l4_norm ** 2))
    return rows


# --- uniqueness sweeps ------------------------------------------------------------

@dataclass
class Cluster:
    amplitudes: np.ndarray
    members: int
    record: Optional[SolutionRecord] = None


@dataclass
class UniquenessReport:
    profile: tuple
    launches: int
    clusters: list
    verdict: str
    converged: int = 0
    max_boundary_residual: float = 0.0
    max_ode_residual: float = 0.0
    box: tuple = ()
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "profile": list(self.profile), "launches": self.launches, "verdict": self.verdict,
            "converged": self.converged, "seed": self.seed,
            "box": [list(map(float, b)) for b in self.box],
            "max_boundary_residual": self.max_boundary_residual,
            "max_ode_residual": self.max_ode_residual,
            "clusters": [{"amplitudes": c.amplitudes.tolist(), "members": c.members}
                         for c in self.clusters],
        }


def cluster_amplitudes(amps: Sequence[np.ndarray], radius: float = 1e-6) -> list:
    """Greedy clustering by relative sup-distance after lexicographic sorting,
    so the result does not depend on the order of the inputs."""
    if not len(amps):
        return []
    arr = np.array(sorted((np.asarray(a, float) for a in amps), key=tuple))
    clusters = []
    for a in arr:
        for c in clusters:
            ref = c[0]
            if np.max(np.abs(a - ref)) <= radius * max(np.max(np.abs(ref)), 1e-300):
                c.append(a)
                break
        else:
            clusters.append([a])
    return [Cluster(np.mean(c, axis=0), len(c)) for c in clusters]


def default_box(params: SystemParams, profile: NodalProfile, config=None):
    a_max = float(np.max(scalar_seeds(params.with_beta(np.zeros_like(params.beta)), profile, config)))
    return [(0.0, 2.0 * a_max)] * params.n


def _launch(params, config, a0, target, polish):
    try:
        rec = newton_refine(params, a0, config, polish=polish)
    except (ShootingError, IntegrationError):
        return None
    if rec.nodal_counts != target or not np.all(rec.amplitudes > nodal.DEFAULT_ZERO_TOL):
        return None
    if rec.profile is not None and nodal.classify_triviality(rec.profile) is not nodal.Triviality.NON_TRIVIAL:
        return None
    return rec


def uniqueness_sweep(params: SystemParams, profile, launches: int = 200, box=None,
                     cluster_radius: float = 1e-6, seed: int = 0,
                     config: Optional[IntegratorConfig] = None, jobs: int = 1,
                     polish: bool = True) -> UniquenessReport:
    """Multistart Newton from scrambled Halton points in the amplitude box.

    Every converged launch with the target nodal counts and positive
    amplitudes inside the box is polished (so residuals of all kept records are checked) and
    the amplitudes are clustered.
    """
    if launches < 1:
        raise ValueError("launches must be >= 1")
    config = config or IntegratorConfig()
    if not isinstance(profile, NodalProfile):
        profile = NodalProfile(profile)
    target = tuple(int(c) for c in profile.counts)
    if box is None:
        box = default_box(params, profile, config)
    box = [tuple(map(float, b)) for b in box]
    lo = np.array([b[0] for b in box])
    hi = np.array([b[1] for b in box])
    pts = qmc.Halton(d=params.n, scramble=True, seed=seed).random(launches)
    starts = lo + (hi - lo) * pts
    starts = np.where(starts <= 0, 0.5 * (lo + hi) * 1e-3, starts)

    def run(a0):
        return _launch(params, config, a0, target, polish)

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            results = list(pool.map(run, starts))
    else:
        results = [run(a0) for a0 in starts]
    # roots Newton reached outside the box are not counted for this box
    kept = [r for r in results
            if r is not None and np.all((r.amplitudes >= lo) & (r.amplitudes <= hi))]

    clusters = cluster_amplitudes([r.amplitudes for r in kept], cluster_radius)
    for c in clusters:
        c.record = min(kept, key=lambda r: np.max(np.abs(r.amplitudes - c.amplitudes)))
    verdict = {0: "none-found", 1: "unique"}.get(len(clusters), "multiple")
    bres = max((r.boundary_residual for r in kept), default=0.0)
    ores = max((r.ode_residual for r in kept), default=0.0) if polish else float("nan")
    return UniquenessReport(target, launches, clusters, verdict, len(kept), float(bres),
                            float(ores), tuple(box), seed)
