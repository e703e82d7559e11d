"""Nodal counting, bump decomposition, triviality classes and rescaling of
sampled radial profiles."""
from __future__ import annotations

import enum

import numpy as np
from scipy.interpolate import CubicHermiteSpline, CubicSpline
from scipy.optimize import brentq

from .model import Bump, SampledProfile

DEFAULT_ZERO_TOL = 1e-9

# 8-point Gauss-Legendre: exact for |p|^4 r^2 with p cubic (degree 14).
_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


class Triviality(str, enum.Enum):
    TRIVIAL = "trivial"
    SEMI_TRIVIAL = "semi-trivial"
    NON_TRIVIAL = "non-trivial"


def _as_values(component_values) -> np.ndarray:
    if isinstance(component_values, SampledProfile):
        if component_values.n != 1:
            raise ValueError("expected a single-component profile")
        return component_values.values[0]
    return np.asarray(component_values, dtype=float).ravel()


def _significant_signs(u, zero_tol):
    idx = np.flatnonzero(np.abs(u) > zero_tol)
    return idx, np.sign(u[idx])


def count_nodes(component_values, zero_tol: float = DEFAULT_ZERO_TOL) -> int:
    """Number of strict sign alternations, ignoring samples with |u| <= zero_tol."""
    u = _as_values(component_values)
    if u.size == 0:
        raise ValueError("empty input")
    if not np.all(np.isfinite(u)):
        raise ValueError("non-finite samples")
    if not zero_tol > 0:
        raise ValueError("zero_tol must be > 0")
    _, s = _significant_signs(u, zero_tol)
    return int(np.count_nonzero(s[1:] != s[:-1]))


def _interpolant(radii, u, du=None):
    if du is not None:
        return CubicHermiteSpline(radii, u, du)
    return CubicSpline(radii, u)


def _power_integral(poly, a, b, dim, power=4):
    """∫_a^b |p|^power w(r) dr over the pieces of ``poly`` intersecting [a, b],
    Gauss-Legendre per piece; w = 4πr² in 3-D and 1 in 1-D."""
    if b <= a:
        return 0.0
    knots = poly.x
    inner = knots[(knots > a) & (knots < b)]
    edges = np.concatenate([[a], inner, [b]])
    lo, hi = edges[:-1], edges[1:]
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    pts = mid[:, None] + half[:, None] * _GL_X[None, :]
    vals = np.abs(poly(pts)) ** power
    if dim == 3:
        vals = vals * 4.0 * np.pi * pts ** 2
    return float(np.sum(half[:, None] * _GL_W[None, :] * vals))


def _crossing_radii(radii, u, poly, zero_tol):
    idx, s = _significant_signs(u, zero_tol)
    flips = np.flatnonzero(s[1:] != s[:-1])
    roots = []
    for f in flips:
        lo, hi = radii[idx[f]], radii[idx[f + 1]]
        roots.append(brentq(lambda x: float(poly(x)), lo, hi, xtol=1e-15, rtol=1e-15))
    return np.array(roots), s


def decompose_bumps(component_values, radii=None, derivatives=None,
                    zero_tol: float = DEFAULT_ZERO_TOL, dim: int = 3) -> list:
    """Split a radial component into bumps between consecutive sign changes.

    Accepts a single-component SampledProfile or raw samples with ``radii``.
    Each bump carries its L⁴ norm under the radial measure (4πr²dr for
    ``dim=3``, dr for ``dim=1``).  An all-zero component yields ``[]``.
    """
    if isinstance(component_values, SampledProfile):
        prof = component_values
        radii, u, derivatives = prof.radii, prof.values[0], prof.derivatives[0]
    else:
        u = np.asarray(component_values, dtype=float).ravel()
        if radii is None:
            raise ValueError("radii required for raw samples")
        radii = np.asarray(radii, dtype=float)
    count_nodes(u, zero_tol)
    if not np.any(np.abs(u) > zero_tol):
        return []
    poly = _interpolant(radii, u, derivatives)
    roots, signs = _crossing_radii(radii, u, poly, zero_tol)
    edges = np.concatenate([[radii[0]], roots, [radii[-1]]])
    seq = [int(signs[0])]
    for _ in roots:
        seq.append(-seq[-1])
    return [Bump(float(a), float(b), sg, _power_integral(poly, a, b, dim) ** 0.25)
            for a, b, sg in zip(edges[:-1], edges[1:], seq)]


def lp_norm(profile: SampledProfile, j: int = 0, dim: int = 3, power: int = 4) -> float:
    """(∫|u_j|^p w dr)^{1/p} on the profile's Hermite interpolant."""
    poly = _interpolant(profile.radii, profile.values[j], profile.derivatives[j])
    return _power_integral(poly, profile.radii[0], profile.radii[-1], dim, power) ** (1.0 / power)


def classify_triviality(profile: SampledProfile, zero_tol: float = DEFAULT_ZERO_TOL) -> Triviality:
    small = profile.sup_norms() <= zero_tol
    if np.all(small):
        return Triviality.TRIVIAL
    if np.any(small):
        return Triviality.SEMI_TRIVIAL
    return Triviality.NON_TRIVIAL


def rescale_profile(profile: SampledProfile, M: float, center: float = 0.0,
                    grid=None) -> SampledProfile:
    """Profile x ↦ M⁻¹ U(M⁻¹(x + M·center)).

    Without ``grid`` the samples are carried over to x = M(r - center); with
    ``grid`` they are resampled by cubic Hermite interpolation.
    """
    if not M > 0:
        raise ValueError("M must be > 0")
    if not (profile.radii[0] <= center <= profile.radii[-1]):
        raise ValueError("center outside domain")
    x = M * (profile.radii - center)
    values = profile.values / M
    derivs = profile.derivatives / M ** 2
    crossings = tuple(M * (np.asarray(c) - center) for c in profile.zero_crossings)
    if grid is None:
        return SampledProfile(x, values, derivs, crossings)
    grid = np.asarray(grid, dtype=float)
    if grid[0] < x[0] or grid[-1] > x[-1]:
        raise ValueError("grid outside rescaled span")
    new_v = np.empty((profile.n, grid.size))
    new_d = np.empty_like(new_v)
    for j in range(profile.n):
        poly = CubicHermiteSpline(x, values[j], derivs[j])
        new_v[j] = poly(grid)
        new_d[j] = poly.derivative()(grid)
    crossings = tuple(c[(c >= grid[0]) & (c <= grid[-1])] for c in crossings)
    return SampledProfile(grid, new_v, new_d, crossings)
