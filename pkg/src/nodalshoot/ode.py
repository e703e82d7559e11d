"""Radial right-hand sides, regular start at the origin, adaptive integration
with events, and variational (sensitivity) propagation."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import kernels
from ._fd import apply_central
from .model import Geometry, SampledProfile, SystemParams

TERMINATION = {
    kernels.REACHED_END: "reached_end",
    kernels.BLOWUP: "blowup",
    kernels.NONFINITE: "nonfinite",
    kernels.STEP_UNDERFLOW: "step_underflow",
    kernels.NODE_LIMIT: "node_limit",
}


class IntegrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float = 0.05
    blowup_threshold: float = 1e6
    r_max: float = 1.0
    h0: float = 1e-6
    n_samples: int = 2001
    zero_tol: float = 1e-9
    max_events: int = 100_000

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("integrator tolerances must be > 0")
        if not self.r_max > 0:
            raise ValueError("r_max must be > 0")
        if not self.max_step > 0:
            raise ValueError("max_step must be > 0")
        if self.n_samples < 2:
            raise ValueError("n_samples must be >= 2")

    def tightened(self, rel_tol: float, abs_tol: float) -> "IntegratorConfig":
        return replace(self, rel_tol=min(self.rel_tol, rel_tol), abs_tol=min(self.abs_tol, abs_tol))


@dataclass
class ShootState:
    """Point on a radial trajectory.

    ``sensitivity`` has shape (2N, k): column m is d(u, u')/d(datum m).
    """

    r: float
    u: np.ndarray
    du: np.ndarray
    sensitivity: Optional[np.ndarray] = None

    def __post_init__(self):
        self.u = np.atleast_1d(np.asarray(self.u, dtype=float))
        self.du = np.atleast_1d(np.asarray(self.du, dtype=float))
        if self.u.shape != self.du.shape:
            raise ValueError("u and du must have the same length")
        if self.sensitivity is not None:
            self.sensitivity = np.asarray(self.sensitivity, dtype=float)
            if self.sensitivity.ndim != 2 or self.sensitivity.shape[0] != 2 * self.u.size:
                raise ValueError("sensitivity must have shape (2N, k)")

    @property
    def n(self) -> int:
        return self.u.size

    def pack(self) -> np.ndarray:
        parts = [self.u, self.du]
        if self.sensitivity is not None:
            parts.append(self.sensitivity.T.ravel())
        return np.concatenate(parts)

    @classmethod
    def unpack(cls, r, y, n) -> "ShootState":
        sens = None
        if y.size > 2 * n:
            sens = y[2 * n:].reshape(-1, 2 * n).T.copy()
        return cls(r, y[:n].copy(), y[n:2 * n].copy(), sens)


@dataclass
class Event:
    component: int
    r: float
    kind: str  # "crossing" or "graze"


@dataclass
class IntegrationResult:
    profile: Optional[SampledProfile]
    events: list
    reason: str
    final: ShootState
    node_counts: np.ndarray
    n_steps: int = 0
    n_rejected: int = 0
    escape_radius: Optional[float] = None
    sensitivity_samples: Optional[np.ndarray] = None  # (len(radii), 2N, k)

    @property
    def crossings(self):
        return [[e.r for e in self.events if e.component == j and e.kind == "crossing"]
                for j in range(self.final.n)]


def rhs(params: SystemParams, r: float, state: ShootState) -> ShootState:
    """Derivative of ``state``; the returned ShootState holds (u', u'') and,
    if present, the derivative of the sensitivity block."""
    if params.geometry.dim == 3 and r == 0:
        raise ValueError("origin requires series start")
    if state.n != params.n:
        raise ValueError("state size does not match params")
    y = state.pack()
    out = np.empty_like(y)
    lam, mu, beta, dim_coef = params.kernel_args()
    ndir = 0 if state.sensitivity is None else state.sensitivity.shape[1]
    kernels.radial_rhs(float(r), y, out, lam, mu, beta, dim_coef, params.n, ndir)
    return ShootState.unpack(r, out, params.n)


def _force(params: SystemParams, a: np.ndarray) -> np.ndarray:
    """Δu at the origin for amplitudes ``a``: λa - μa³ - Σβ a_i² a."""
    lam, mu, beta, _ = params.kernel_args()
    return lam * a - mu * a ** 3 - (beta @ a ** 2) * a


def _force_jacobian(params: SystemParams, a: np.ndarray) -> np.ndarray:
    lam, mu, beta, _ = params.kernel_args()
    jac = -2.0 * beta * np.outer(a, a)
    jac[np.diag_indices_from(jac)] = lam - 3 * mu * a ** 2 - beta @ a ** 2
    return jac


def origin_series_start(params: SystemParams, amplitudes, h0: float = 1e-6,
                        sensitivity: bool = False) -> ShootState:
    """State at r=h0 from the regular expansion u = a + c r², c = Δu(0)/6."""
    if not h0 > 0:
        raise ValueError("h0 must be > 0")
    if params.geometry.dim != 3:
        raise ValueError("series start applies to ball3d/entire3d")
    a = np.atleast_1d(np.asarray(amplitudes, dtype=float))
    if a.size != params.n:
        raise ValueError("amplitudes length does not match params")
    c = _force(params, a) / 6.0
    sens = None
    if sensitivity:
        dc = _force_jacobian(params, a) / 6.0
        sens = np.vstack([np.eye(params.n) + dc * h0 ** 2, 2.0 * dc * h0])
    return ShootState(h0, a + c * h0 ** 2, 2.0 * c * h0, sens)


def initial_state(params: SystemParams, data, h0: float = 1e-6,
                  sensitivity: bool = False) -> ShootState:
    """Starting state for any geometry.

    ``data`` are amplitudes at the symmetry point (ball3d, entire3d, line) or
    initial slopes with zero values (halfline).
    """
    data = np.atleast_1d(np.asarray(data, dtype=float))
    geom = params.geometry
    if geom.dim == 3:
        return origin_series_start(params, data, h0, sensitivity)
    eye = np.eye(params.n)
    zero = np.zeros(params.n)
    if geom is Geometry.LINE:
        sens = np.vstack([eye, 0 * eye]) if sensitivity else None
        return ShootState(0.0, data, zero, sens)
    sens = np.vstack([0 * eye, eye]) if sensitivity else None
    return ShootState(0.0, zero, data, sens)


def _origin_values(params, data, radii):
    """Samples below the series start radius (at most the origin itself)."""
    data = np.atleast_1d(np.asarray(data, dtype=float))
    c = _force(params, data) / 6.0
    u = data[:, None] + c[:, None] * radii[None, :] ** 2
    du = 2.0 * c[:, None] * radii[None, :]
    return u, du


def integrate(params: SystemParams, config: IntegratorConfig, start: ShootState,
              r_eval=None, stop_counts=None, land_on_grid: bool = False) -> IntegrationResult:
    """Integrate from ``start`` to ``config.r_max``.

    ``r_eval`` selects the sampling grid (default: ``config.n_samples`` uniform
    points from ``start.r``); pass an empty array to skip sampling.  With
    ``stop_counts`` the run ends as soon as component j has more than
    ``stop_counts[j]`` sign changes (negative entries disable the check).
    ``land_on_grid`` forces steps to end on every sampling radius.
    """
    if not start.r < config.r_max:
        raise ValueError("start radius must be below r_max")
    if params.geometry.dim == 3 and start.r <= 0:
        raise ValueError("origin requires series start")
    n = params.n
    if r_eval is None:
        r_eval = np.linspace(start.r, config.r_max, config.n_samples)
    r_eval = np.asarray(r_eval, dtype=float)
    if stop_counts is None:
        stop = -np.ones(n, dtype=np.int64)
    else:
        stop = np.asarray(stop_counts, dtype=np.int64)
    lam, mu, beta, dim_coef = params.kernel_args()
    y0 = start.pack()
    ndir = 0 if start.sensitivity is None else start.sensitivity.shape[1]
    (status, r_fin, y_fin, samples, n_filled, ev_comp, ev_r, ev_kind, counts,
     n_acc, n_rej) = kernels.dopri5_integrate(
        y0, float(start.r), float(config.r_max), lam, mu, beta, dim_coef, n, ndir,
        float(config.rel_tol), float(config.abs_tol), float(config.max_step), -1.0,
        float(config.blowup_threshold), float(config.zero_tol), r_eval, stop,
        int(config.max_events), bool(land_on_grid))
    reason = TERMINATION[int(status)]
    if reason == "step_underflow":
        raise IntegrationError(f"stiffness/blow-up at r={r_fin:.17g}")

    events = [Event(int(c), float(r), "crossing" if k == kernels.EVENT_CROSSING else "graze")
              for c, r, k in zip(ev_comp, ev_r, ev_kind)]
    final = ShootState.unpack(float(r_fin), y_fin, n)

    profile = None
    keep = np.isfinite(samples[:, 0]) if samples.size else np.zeros(0, bool)
    keep &= np.all(np.isfinite(samples[:, :2 * n]), axis=1) if samples.size else keep
    if np.any(keep):
        radii = r_eval[keep]
        vals = samples[keep, :n].T
        ders = samples[keep, n:2 * n].T
        crossings = tuple(np.array([e.r for e in events if e.component == j and e.kind == "crossing"
                                    and radii[0] <= e.r <= radii[-1]]) for j in range(n))
        profile = SampledProfile(radii, vals, ders, crossings)
    sens_samples = None
    if ndir and np.any(keep):
        sens_samples = samples[keep, 2 * n:].reshape(-1, ndir, 2 * n).transpose(0, 2, 1).copy()

    escape = float(r_fin) if reason in ("blowup", "nonfinite") else None
    return IntegrationResult(profile, events, reason, final, counts.copy(), int(n_acc), int(n_rej),
                             escape, sens_samples)


def shoot(params: SystemParams, config: IntegratorConfig, data, sensitivity: bool = False,
          n_samples: Optional[int] = None, r_eval=None, stop_counts=None,
          land_on_grid: bool = False) -> IntegrationResult:
    """Integrate from the symmetry point (or the half-line endpoint) with the
    profile grid starting at r=0."""
    start = initial_state(params, data, config.h0, sensitivity)
    if r_eval is None:
        if n_samples is None:
            n_samples = config.n_samples
        r_eval = np.linspace(0.0, config.r_max, n_samples) if n_samples else np.zeros(0)
    r_eval = np.asarray(r_eval, dtype=float)
    below = r_eval < start.r
    res = integrate(params, config, start, r_eval[~below], stop_counts, land_on_grid)
    if np.any(below) and res.profile is not None:
        head = r_eval[below]
        u0, du0 = _origin_values(params, data, head)
        p = res.profile
        res.profile = SampledProfile(np.concatenate([head, p.radii]),
                                     np.hstack([u0, p.values]),
                                     np.hstack([du0, p.derivatives]),
                                     p.zero_crossings)
        if res.sensitivity_samples is not None:
            k = res.sensitivity_samples.shape[2]
            head_sens = np.empty((head.size, 2 * params.n, k))
            # d(u, u')/d(data) at r <= h0 from the expansion; only the origin in practice
            data = np.atleast_1d(np.asarray(data, dtype=float))
            dc = _force_jacobian(params, data) / 6.0
            for m, rr in enumerate(head):
                head_sens[m] = np.vstack([np.eye(params.n) + dc * rr ** 2, 2.0 * dc * rr])
            res.sensitivity_samples = np.concatenate([head_sens, res.sensitivity_samples])
    return res


def integrate_with_sensitivity(params: SystemParams, config: IntegratorConfig, amplitudes,
                               n_samples: Optional[int] = None):
    """Shoot with the variational equations along ∂/∂a_j.

    Returns ``(result, J)`` with ``J[i, j] = ∂u_i(r_max)/∂a_j``.
    """
    if params.geometry is not Geometry.BALL3D:
        raise ValueError("integrate_with_sensitivity requires ball3d")
    res = shoot(params, config, amplitudes, sensitivity=True, n_samples=n_samples)
    if res.reason != "reached_end":
        raise IntegrationError(f"integration ended early ({res.reason}) at r={res.final.r:.17g}")
    jac = res.final.sensitivity[:params.n, :].copy()
    return res, jac


def rk4_fixed(params: SystemParams, amplitudes, r_end: float = 1.0, h: float = 1e-4):
    """Classical fixed-step RK4 oracle, vectorised over a batch of amplitude
    vectors (shape (B, N) or (N,)).  Starts at r=h from a fourth-order
    expansion at the origin.  Returns ``(radii, u, du)`` with u of shape
    (B, N, steps+1)."""
    a = np.atleast_2d(np.asarray(amplitudes, dtype=float))
    lam, mu, beta, dim_coef = params.kernel_args()

    def force(u):
        return lam * u - mu * u ** 3 - (u ** 2 @ beta) * u

    def deriv(r, u, du):
        d2 = force(u)
        if dim_coef:
            d2 = d2 - dim_coef * du / r
        return du, d2

    # u = a + c r² + d r⁴ with Δ(r²)=2·dim and Δ(r⁴)=4(dim+2) r²
    dim = 3 if dim_coef else 1
    f0 = force(a)
    c = f0 / (2 * dim)
    jac_c = (lam - 3 * mu * a ** 2 - (a ** 2 @ beta)) * c - 2 * (c * a) @ beta * a
    d = jac_c / (4 * (dim + 2))
    r0 = h
    u = a + c * r0 ** 2 + d * r0 ** 4
    du = 2 * c * r0 + 4 * d * r0 ** 3

    n_steps = int(round((r_end - r0) / h))
    radii = r0 + h * np.arange(n_steps + 1)
    out_u = np.empty(a.shape + (n_steps + 1,))
    out_du = np.empty_like(out_u)
    out_u[..., 0] = u
    out_du[..., 0] = du
    for k in range(n_steps):
        r = radii[k]
        k1u, k1d = deriv(r, u, du)
        k2u, k2d = deriv(r + h / 2, u + h / 2 * k1u, du + h / 2 * k1d)
        k3u, k3d = deriv(r + h / 2, u + h / 2 * k2u, du + h / 2 * k2d)
        k4u, k4d = deriv(r + h, u + h * k3u, du + h * k3d)
        u = u + h / 6 * (k1u + 2 * k2u + 2 * k3u + k4u)
        du = du + h / 6 * (k1d + 2 * k2d + 2 * k3d + k4d)
        out_u[..., k + 1] = u
        out_du[..., k + 1] = du
    return radii, out_u, out_du


def ode_defect(params: SystemParams, profile: SampledProfile, order: int = 12) -> float:
    """Sup over the interior of a uniform grid of |d(u')/dr - u''(r, u, u')|,
    with d(u')/dr from a central difference of the sampled derivatives."""
    r = profile.radii
    dr = np.diff(r)
    if not np.allclose(dr, dr[0], rtol=1e-9, atol=0):
        raise ValueError("ode_defect needs a uniform grid")
    m = order // 2
    if r.size <= 2 * m:
        raise ValueError("grid too short for the stencil")
    fd = apply_central(profile.derivatives, dr[0], 1, m)
    rr = r[m:-m]
    u = profile.values[:, m:-m]
    lam, mu, beta, dim_coef = params.kernel_args()
    model = lam[:, None] * u - mu[:, None] * u ** 3 - (beta @ u ** 2) * u
    if dim_coef:
        model = model - dim_coef * profile.derivatives[:, m:-m] / rr
    return float(np.max(np.abs(fd - model)))
