"""Energy functional of the coupled system on the unit ball and its weak-form
residual, both by composite Simpson quadrature on the profile grid."""
import numpy as np
from scipy.integrate import simpson

from .model import Geometry, SampledProfile, SystemParams


def _check_domain(params: SystemParams, profile: SampledProfile):
    if params.geometry is not Geometry.BALL3D:
        raise ValueError("energy is defined for ball3d")
    if profile.n != params.n:
        raise ValueError("profile/params component mismatch")
    if profile.radii[0] > 0.0 or abs(profile.radii[-1] - 1.0) > 1e-12:
        raise ValueError("incomplete domain")


def _radial_integral(f, r):
    return simpson(4.0 * np.pi * r ** 2 * f, x=r)


def _coupling_density(beta, u):
    # Σ_j Σ_{i≠j} β_ij u_i² u_j²
    sq = u ** 2
    return np.einsum("ij,ik,jk->k", beta, sq, sq)


def energy(params: SystemParams, profile: SampledProfile) -> float:
    """½Σ∫(|u_j'|² + λ_j u_j²) - ¼Σ∫(μ_j u_j⁴ + Σ_{i≠j} β_ij u_i² u_j²)."""
    _check_domain(params, profile)
    u, du, r = profile.values, profile.derivatives, profile.radii
    lam, mu = params.lambda_[:, None], params.mu[:, None]
    quad = np.sum(du ** 2 + lam * u ** 2, axis=0)
    quart = np.sum(mu * u ** 4, axis=0) + _coupling_density(params.beta, u)
    return float(0.5 * _radial_integral(quad, r) - 0.25 * _radial_integral(quart, r))


def weak_residual(params: SystemParams, profile: SampledProfile, phi, dphi) -> float:
    """⟨-ΔU + λU - f(U), Φ⟩ = Σ_j ∫(u_j'φ_j' + λ_j u_j φ_j - f_j(U) φ_j) 4πr² dr."""
    _check_domain(params, profile)
    u, du, r = profile.values, profile.derivatives, profile.radii
    phi = np.atleast_2d(np.asarray(phi, dtype=float))
    dphi = np.atleast_2d(np.asarray(dphi, dtype=float))
    lam, mu = params.lambda_[:, None], params.mu[:, None]
    f = mu * u ** 3 + (params.beta @ u ** 2) * u
    dens = np.sum(du * dphi + lam * u * phi - f * phi, axis=0)
    return float(_radial_integral(dens, r))


def perturbed(profile: SampledProfile, phi, dphi, eps: float) -> SampledProfile:
    return SampledProfile(profile.radii, profile.values + eps * np.atleast_2d(phi),
                          profile.derivatives + eps * np.atleast_2d(dphi))
