"""Scalar problem -Δu + λu = μu³ on the unit ball: nodal shooting, the
transform to a one-dimensional Emden-Fowler form, and the two
non-degeneracy tests (t-space and r-space)."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import quad, solve_ivp

from . import nodal
from ._fd import apply_central
from .energy import energy
from .model import SampledProfile, SolutionRecord, SystemParams
from .ode import IntegratorConfig, IntegrationError, ode_defect, shoot

log = logging.getLogger(__name__)

# Final solves and stored profiles use a tight tolerance on a uniform grid the
# integrator lands on, so that the ODE defect can be checked by differences.
VERIFY_RTOL = 1e-14
VERIFY_ATOL = 1e-16
VERIFY_SAMPLES = 4001

BOUNDARY_TOL = 1e-8
TRANSFORM_TOL = 1e-4
NONDEG_REL = 1e-3


class NodalClassUnreachable(RuntimeError):
    pass


class UniquenessViolation(RuntimeError):
    pass


class TransformInconsistent(RuntimeError):
    pass


class NondegeneracyConflict(RuntimeError):
    pass


def scalar_params(lam: float, mu: float) -> SystemParams:
    return SystemParams([lam], [mu], [[0.0]])


def verify_config(config: Optional[IntegratorConfig] = None) -> IntegratorConfig:
    config = config or IntegratorConfig()
    return config.tightened(VERIFY_RTOL, VERIFY_ATOL)


def verify_grid(config: IntegratorConfig, n: int = VERIFY_SAMPLES) -> np.ndarray:
    return np.linspace(0.0, config.r_max, n)


def verified_shot(params, amplitudes, config=None, sensitivity=False):
    """Shot at verification tolerance, landing on the verification grid."""
    vcfg = verify_config(config)
    return shoot(params, vcfg, amplitudes, sensitivity=sensitivity,
                 r_eval=verify_grid(vcfg), land_on_grid=True)


def make_record(params: SystemParams, amplitudes, res, iterations: int = 0,
                meta: Optional[dict] = None) -> SolutionRecord:
    """Assemble a SolutionRecord from a verified shot."""
    prof = res.profile
    return SolutionRecord(
        params=params,
        amplitudes=np.asarray(amplitudes, dtype=float),
        profile=prof,
        nodal_counts=tuple(int(c) for c in res.node_counts),
        boundary_residual=float(np.max(np.abs(res.final.u))),
        ode_residual=ode_defect(params, prof),
        energy=energy(params, prof),
        iterations=iterations,
        meta=dict(meta or {}),
    )


@dataclass
class ScalarShot:
    boundary_value: float
    nodes: int
    profile: Optional[SampledProfile]
    reason: str


def shoot_scalar(lam: float, mu: float, a: float, config: Optional[IntegratorConfig] = None,
                 n_samples: Optional[int] = None) -> ScalarShot:
    """Integrate from u(0)=a to r=1; nodes are sign changes on (0, 1)."""
    if not all(np.isfinite([lam, mu, a])):
        raise ValueError("non-finite input")
    config = config or IntegratorConfig()
    res = shoot(scalar_params(lam, mu), config, [a], n_samples=n_samples)
    return ScalarShot(float(res.final.u[0]), int(res.node_counts[0]), res.profile, res.reason)


def _closed_count(params, config, a) -> int:
    res = shoot(params, config, [a], n_samples=0)
    if res.reason != "reached_end":
        raise IntegrationError(f"shot at a={a!r} ended early: {res.reason}")
    return int(res.node_counts[0])


def _polish(params, a_lo, a_hi, P, config, max_iter=40):
    """Safeguarded Newton on u(1; a) at verification tolerance inside a sign
    bracket, with the variational derivative d u(1)/da."""
    sign_lo = (-1) ** P

    def evaluate(a):
        res = verified_shot(params, [a], config, sensitivity=True)
        return res, float(res.final.u[0]), float(res.final.sensitivity[0, 0])

    res_lo, f_lo, _ = evaluate(a_lo)
    res_hi, f_hi, _ = evaluate(a_hi)
    widen = 0
    while not (f_lo * sign_lo > 0 and f_hi * sign_lo < 0):
        widen += 1
        if widen > 30:
            raise NodalClassUnreachable(f"could not bracket the P={P} amplitude")
        width = a_hi - a_lo
        if f_lo * sign_lo <= 0:
            a_lo = max(a_lo - width, 0.5 * a_lo)
            res_lo, f_lo, _ = evaluate(a_lo)
        if f_hi * sign_lo >= 0:
            a_hi = a_hi + width
            res_hi, f_hi, _ = evaluate(a_hi)

    a = 0.5 * (a_lo + a_hi)
    best = None
    for it in range(1, max_iter + 1):
        res, f, df = evaluate(a)
        if best is None or abs(f) < abs(best[2]):
            best = (a, res, f, it)
        if abs(f) <= 1e-13 * max(1.0, abs(df)) or (a_hi - a_lo) <= 4e-16 * a:
            break
        if f * sign_lo > 0:
            a_lo = a
        else:
            a_hi = a
        step = f / df if df != 0 else np.inf
        a_new = a - step
        if not (a_lo < a_new < a_hi):
            a_new = 0.5 * (a_lo + a_hi)
        if a_new == a:
            break
        a = a_new
    return best


def find_amplitude(lam: float, mu: float, P: int, config: Optional[IntegratorConfig] = None,
                   a_start: float = 0.5, growth: float = 1.1, a_cap: float = 1e4) -> SolutionRecord:
    """Positive origin value of the radial solution with exactly P sign changes.

    A geometric scan of the closed node count (sign changes on (0,1] including
    the sign of u(1)) brackets the transition P -> P+1; the scan continues into
    class P+2 to confirm that the transition is crossed exactly once.  The
    bracket is bisected on the count and polished by Newton.
    """
    if P < 0:
        raise ValueError("P must be >= 0")
    if not (lam > 0 and mu > 0):
        raise ValueError("lambda and mu must be > 0")
    if lam < 1:
        log.warning("lambda=%g < 1: outside the range where uniqueness is known", lam)
    config = config or IntegratorConfig()
    params = scalar_params(lam, mu)

    a = a_start
    while _closed_count(params, config, a) > P:
        a /= growth
        if a < 1e-12:
            raise NodalClassUnreachable(f"nodal class P={P} unreachable")
    lo, hi = None, None
    transitions = 0
    prev = _closed_count(params, config, a)
    prev_a = a
    while a <= a_cap:
        a *= growth
        k = _closed_count(params, config, a)
        if prev <= P < k:
            transitions += 1
            if lo is None:
                lo, hi = prev_a, a
        if k >= P + 2:
            break
        prev, prev_a = k, a
    if lo is None:
        raise NodalClassUnreachable(f"nodal class P={P} unreachable below amplitude cap {a_cap}")
    if transitions > 1:
        raise UniquenessViolation(f"class P={P} entered {transitions} times")

    while hi - lo > 1e-7 * hi:
        mid = 0.5 * (lo + hi)
        if _closed_count(params, config, mid) > P:
            hi = mid
        else:
            lo = mid

    a_star, res, f, iters = _polish(params, lo, hi, P, config)
    if abs(f) > BOUNDARY_TOL:
        raise NodalClassUnreachable(f"polish stalled at |u(1)|={abs(f):.3e}")
    rec = make_record(params, [a_star], res, iterations=iters,
                      meta={"bracket": [lo, hi], "target_nodes": P})
    if rec.nodal_counts[0] != P:
        raise NodalClassUnreachable(f"converged solution has {rec.nodal_counts[0]} nodes, wanted {P}")
    return rec


# --- transform to one dimension -------------------------------------------------

def phi(lam: float, r):
    """Companion function √λ·cosh(√λ r)/r, solving Δφ = λφ for r > 0."""
    s = np.sqrt(lam)
    return s * np.cosh(s * r) / r


def t_density(lam: float, r):
    return lam / np.cosh(np.sqrt(lam) * r) ** 2


def t_of_r_closed(lam: float, r):
    s = np.sqrt(lam)
    return s * np.tanh(s * r)


def r_of_t(lam: float, t):
    s = np.sqrt(lam)
    return np.arctanh(np.asarray(t) / s) / s


_GL_X, _GL_W = np.polynomial.legendre.leggauss(10)


def t_of_r(lam: float, radii) -> np.ndarray:
    """t(r) = ∫₀ʳ λ/cosh²(√λ s) ds by panel-wise Gauss-Legendre quadrature."""
    radii = np.asarray(radii, dtype=float)
    edges = np.concatenate([[0.0], radii])
    lo, hi = edges[:-1], edges[1:]
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    pts = mid[:, None] + half[:, None] * _GL_X[None, :]
    panel = np.sum(half[:, None] * _GL_W[None, :] * t_density(lam, pts), axis=1)
    return np.cumsum(panel)


def transform_endpoint(lam: float) -> float:
    """T = ∫₀¹ λ/cosh²(√λ s) ds by adaptive quadrature."""
    val, _ = quad(lambda s: t_density(lam, s), 0.0, 1.0, epsabs=1e-14, epsrel=1e-13, limit=200)
    return val


def h_of_r(lam: float, mu: float, r):
    """Coefficient with y'' + h(t) y³ = 0: (μ/λ)·cosh⁶(√λ r)/r²."""
    return (mu / lam) * np.cosh(np.sqrt(lam) * r) ** 6 / r ** 2


def _hy3(lam, mu, r, u):
    # h·y³ with y = r u/(√λ cosh), regular at r=0
    c = np.cosh(np.sqrt(lam) * r)
    return mu * r * u ** 3 * c ** 3 / lam ** 2.5


@dataclass
class TransformedProfile:
    t_grid: np.ndarray
    r_grid: np.ndarray
    y: np.ndarray
    h: np.ndarray
    T: float
    lambda_: float
    mu: float
    dy_dt_chain: np.ndarray
    dy_dt_bracket: np.ndarray
    residual: float
    roundtrip_error: float


def tanaka_transform(lam: float, mu: float, record: SolutionRecord,
                     n_t: int = VERIFY_SAMPLES, config: Optional[IntegratorConfig] = None,
                     fd_order: int = 12) -> TransformedProfile:
    """Map a scalar ball solution to y(t) = u(r)/φ(r) on [0, T].

    The solution is re-sampled on the preimage of a uniform t-grid so that
    y'' can be formed by central differences; ``residual`` is the sup of
    |y'' + h y³| over the interior.  ``roundtrip_error`` compares u on the
    record's own grid with φ(r(t))·y(t) after mapping through t(r) and back.
    """
    params = scalar_params(lam, mu)
    a = float(record.amplitudes[0])
    T = transform_endpoint(lam)
    t_grid = np.linspace(0.0, T, n_t)
    r_grid = r_of_t(lam, t_grid)
    r_grid[0] = 0.0
    r_grid[-1] = 1.0
    vcfg = verify_config(config)
    res = shoot(params, vcfg, [a], r_eval=r_grid, land_on_grid=True)
    u = res.profile.values[0]
    du = res.profile.derivatives[0]

    s = np.sqrt(lam)
    with np.errstate(divide="ignore", invalid="ignore"):
        W = s * np.cosh(s * r_grid)
        y = r_grid * u / W
        h = h_of_r(lam, mu, r_grid)
        dW = lam * np.sinh(s * r_grid)
        dy_chain = ((u + r_grid * du) * W - r_grid * u * dW) / lam ** 2
        ph = phi(lam, r_grid)
        dph = lam * np.sinh(s * r_grid) / r_grid - s * np.cosh(s * r_grid) / r_grid ** 2
        dy_bracket = r_grid ** 2 * (du * ph - u * dph) / lam ** 2
    y[0] = 0.0
    h[0] = np.inf
    dy_bracket[0] = a / lam ** 1.5
    hy3 = _hy3(lam, mu, r_grid, u)

    m = fd_order // 2
    ypp = apply_central(y, t_grid[1] - t_grid[0], 2, m)
    residual = float(np.max(np.abs(ypp + hy3[m:-m]))) if ypp.size else 0.0
    if residual > TRANSFORM_TOL:
        raise TransformInconsistent(f"transform residual {residual:.3e}")

    # round trip on the record's grid: r -> t by quadrature, t -> r in closed form
    rr = record.profile.radii[1:]
    uu = record.profile.values[0, 1:]
    t_rec = t_of_r(lam, rr)
    y_rec = uu / phi(lam, rr)
    r_back = r_of_t(lam, t_rec)
    u_back = phi(lam, r_back) * y_rec
    roundtrip = float(np.max(np.abs(u_back - uu))) if rr.size else 0.0

    return TransformedProfile(t_grid, r_grid, y, h, T, lam, mu, dy_chain, dy_bracket,
                              residual, roundtrip)


# --- non-degeneracy -------------------------------------------------------------

@dataclass
class ScalarNondegeneracy:
    z_T: float
    v_1: float
    nondegenerate: bool
    z_sup: float
    v_sup: float
    z_test: bool
    v_test: bool

    def __iter__(self):
        return iter((self.z_T, self.v_1, self.nondegenerate))


def z_test(lam: float, mu: float, a: float, z_slope: float = 1.0, rtol: float = 1e-12,
           atol: float = 1e-14, r0: float = 1e-6):
    """Solve z'' + 3h(t)y(t)²z = 0, z(0)=0, z'(0)=z_slope on [0, T].

    The solution u is carried along in t (r = r(t)) so that h·y² =
    (μ/λ²)cosh⁴(√λ r)u² is evaluated on the fly.  Returns (z(T), sup|z|).
    """
    s = np.sqrt(lam)
    T = float(t_of_r_closed(lam, 1.0))
    t0 = float(t_of_r_closed(lam, r0))
    c = (lam * a - mu * a ** 3) / 6.0
    u0, du0 = a + c * r0 ** 2, 2 * c * r0

    def f(t, Y):
        u, ur, z, zt = Y
        r = np.arctanh(t / s) / s
        ch = np.cosh(s * r)
        drdt = ch ** 2 / lam
        urr = -2.0 * ur / r + lam * u - mu * u ** 3
        q = mu * ch ** 4 * u * u / lam ** 2
        return [ur * drdt, urr * drdt, zt, -3.0 * q * z]

    # z = slope·t + O(t³) near t=0
    sol = solve_ivp(f, (t0, T), [u0, du0, z_slope * t0, z_slope], method="DOP853",
                    rtol=rtol, atol=atol, dense_output=True)
    if not sol.success:
        raise IntegrationError(f"z-test integration failed: {sol.message}")
    tt = np.linspace(t0, T, 2001)
    z_sup = float(np.max(np.abs(sol.sol(tt)[2])))
    return float(sol.y[2, -1]), z_sup


def nondegeneracy_scalar(lam: float, mu: float, record: SolutionRecord,
                         config: Optional[IntegratorConfig] = None,
                         rel: float = NONDEG_REL) -> ScalarNondegeneracy:
    """Radial non-degeneracy of a scalar solution by two independent routes:
    the t-space test z(T) ≠ 0 and the r-space test v(1) ≠ 0 for the
    linearisation v'' + (2/r)v' = λv - 3μu²v, v(0)=1, v'(0)=0."""
    a = float(record.amplitudes[0])
    zT, z_sup = z_test(lam, mu, a)
    res = verified_shot(scalar_params(lam, mu), [a], config, sensitivity=True)
    v = res.sensitivity_samples[:, 0, 0]
    v1 = float(res.final.sensitivity[0, 0])
    v_sup = float(np.max(np.abs(v)))
    z_ok = abs(zT) > rel * max(1.0, z_sup)
    v_ok = abs(v1) > rel * v_sup
    if z_ok != v_ok:
        raise NondegeneracyConflict(f"z(T)={zT:.3e} and v(1)={v1:.3e} disagree")
    return ScalarNondegeneracy(zT, v1, bool(z_ok), z_sup, v_sup, bool(z_ok), bool(v_ok))


__all__ = [
    "shoot_scalar", "find_amplitude", "tanaka_transform", "nondegeneracy_scalar",
    "TransformedProfile", "ScalarNondegeneracy", "ScalarShot", "z_test",
    "phi", "t_of_r", "t_of_r_closed", "r_of_t", "transform_endpoint", "h_of_r",
    "NodalClassUnreachable", "UniquenessViolation", "TransformInconsistent",
    "NondegeneracyConflict", "make_record", "verified_shot", "verify_config",
    "scalar_params", "nodal",
]
