"""Domain types shared by every solver module."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np


class Geometry(str, enum.Enum):
    BALL3D = "ball3d"
    ENTIRE3D = "entire3d"
    LINE = "line"
    HALFLINE = "halfline"

    @property
    def dim(self) -> int:
        return 3 if self in (Geometry.BALL3D, Geometry.ENTIRE3D) else 1

    @property
    def has_lambda(self) -> bool:
        return self is Geometry.BALL3D


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SystemParams:
    """Coefficients of the coupled cubic system

        -Δu_j + λ_j u_j = μ_j u_j³ + Σ_{i≠j} β_ij u_i² u_j

    ``lambda_`` is ignored for the entire-space geometries, which carry no
    linear term.
    """

    lambda_: np.ndarray
    mu: np.ndarray
    beta: np.ndarray
    geometry: Geometry = Geometry.BALL3D

    def __post_init__(self):
        lam = np.atleast_1d(_frozen(self.lambda_))
        mu = np.atleast_1d(_frozen(self.mu))
        n = mu.size
        beta = _frozen(self.beta) if self.beta is not None else _frozen(np.zeros((n, n)))
        if beta.ndim == 0:
            beta = _frozen(np.zeros((n, n)))
        geometry = Geometry(self.geometry)
        object.__setattr__(self, "lambda_", lam)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "geometry", geometry)

        if n < 1:
            raise ValueError("mu: need at least one component")
        if lam.size != n:
            raise ValueError(f"lambda: expected {n} entries, got {lam.size}")
        if beta.shape != (n, n):
            raise ValueError(f"beta: expected shape {(n, n)}, got {beta.shape}")
        if not (np.all(np.isfinite(lam)) and np.all(np.isfinite(mu)) and np.all(np.isfinite(beta))):
            raise ValueError("params: non-finite coefficient")
        if np.any(mu <= 0):
            raise ValueError("mu: all entries must be > 0")
        if geometry is Geometry.BALL3D and np.any(lam <= 0):
            raise ValueError("lambda: all entries must be > 0 for ball3d")
        if not np.array_equal(beta, beta.T):
            raise ValueError("beta: matrix must be symmetric")
        if np.any(np.diag(beta) != 0):
            raise ValueError("beta: diagonal must be zero")

    @property
    def n(self) -> int:
        return self.mu.size

    @classmethod
    def coupled(cls, lambda_, mu, beta12=0.0, geometry=Geometry.BALL3D) -> "SystemParams":
        """Two-component (or scalar, if ``mu`` has one entry) convenience constructor."""
        mu = np.atleast_1d(np.asarray(mu, dtype=float))
        n = mu.size
        beta = np.zeros((n, n))
        if n == 2:
            beta[0, 1] = beta[1, 0] = beta12
        elif beta12 != 0.0:
            raise ValueError("beta12 only applies to two components")
        if lambda_ is None:
            lambda_ = np.zeros(n)
        return cls(np.broadcast_to(np.asarray(lambda_, dtype=float), (n,)), mu, beta, geometry)

    @classmethod
    def from_upper(cls, lambda_, mu, upper, geometry=Geometry.BALL3D) -> "SystemParams":
        """Build ``beta`` from its strict upper triangle listed row by row."""
        mu = np.atleast_1d(np.asarray(mu, dtype=float))
        n = mu.size
        iu = np.triu_indices(n, k=1)
        upper = np.asarray(upper, dtype=float).ravel()
        if upper.size != iu[0].size:
            raise ValueError(f"beta: expected {iu[0].size} upper-triangular entries, got {upper.size}")
        beta = np.zeros((n, n))
        beta[iu] = upper
        beta = beta + beta.T
        if lambda_ is None:
            lambda_ = np.zeros(n)
        return cls(lambda_, mu, beta, geometry)

    def with_beta(self, beta) -> "SystemParams":
        return replace(self, beta=np.asarray(beta, dtype=float))

    def kernel_args(self):
        lam = np.array(self.lambda_ if self.geometry.has_lambda else np.zeros(self.n))
        dim_coef = 2.0 if self.geometry.dim == 3 else 0.0
        return lam, np.array(self.mu), np.array(self.beta), dim_coef

    def to_dict(self) -> dict:
        return {
            "n_components": self.n,
            "lambda": self.lambda_.tolist(),
            "mu": self.mu.tolist(),
            "beta": self.beta.tolist(),
            "geometry": self.geometry.value,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SystemParams":
        return cls(d["lambda"], d["mu"], d["beta"], d.get("geometry", "ball3d"))

    def __repr__(self):
        return (f"SystemParams(lambda={self.lambda_.tolist()}, mu={self.mu.tolist()}, "
                f"beta={self.beta.tolist()}, geometry={self.geometry.value!r})")


@dataclass(frozen=True)
class NodalProfile:
    counts: tuple

    def __post_init__(self):
        counts = tuple(int(c) for c in np.atleast_1d(self.counts))
        if any(c < 0 for c in counts):
            raise ValueError("nodal counts must be non-negative")
        object.__setattr__(self, "counts", counts)

    def __len__(self):
        return len(self.counts)

    def __getitem__(self, j):
        return self.counts[j]


@dataclass(frozen=True, eq=False)
class SampledProfile:
    """Radial trajectory sampled on a grid.

    ``values`` and ``derivatives`` have shape ``(N, len(radii))``.
    ``zero_crossings[j]`` are the event-located sign changes of component j.
    """

    radii: np.ndarray
    values: np.ndarray
    derivatives: np.ndarray
    zero_crossings: tuple = ()

    def __post_init__(self):
        radii = _frozen(self.radii)
        values = np.atleast_2d(_frozen(self.values))
        derivs = np.atleast_2d(_frozen(self.derivatives))
        values.setflags(write=False)
        derivs.setflags(write=False)
        if radii.ndim != 1 or radii.size == 0:
            raise ValueError("empty input")
        if radii.size > 1 and np.any(np.diff(radii) <= 0):
            raise ValueError("radii must be strictly increasing")
        if values.shape != (values.shape[0], radii.size) or derivs.shape != values.shape:
            raise ValueError("values/derivatives must have shape (N, len(radii))")
        if not (np.all(np.isfinite(values)) and np.all(np.isfinite(derivs))):
            raise ValueError("profile contains non-finite samples")
        crossings = self.zero_crossings
        if not crossings:
            crossings = tuple(() for _ in range(values.shape[0]))
        crossings = tuple(_frozen(c) for c in crossings)
        for c in crossings:
            if c.size and (np.any(np.diff(c) <= 0) or c[0] < radii[0] or c[-1] > radii[-1]):
                raise ValueError("zero crossings must be increasing and inside the radius span")
        object.__setattr__(self, "radii", radii)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "derivatives", derivs)
        object.__setattr__(self, "zero_crossings", crossings)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def component(self, j: int) -> "SampledProfile":
        return SampledProfile(self.radii, self.values[j:j + 1], self.derivatives[j:j + 1],
                              (self.zero_crossings[j],))

    def sup_norms(self) -> np.ndarray:
        return np.max(np.abs(self.values), axis=1)


@dataclass(frozen=True, eq=False)
class SolutionRecord:
    params: SystemParams
    amplitudes: np.ndarray
    profile: SampledProfile
    nodal_counts: tuple
    boundary_residual: float
    ode_residual: float
    energy: float
    iterations: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "amplitudes", _frozen(np.atleast_1d(self.amplitudes)))
        object.__setattr__(self, "nodal_counts", tuple(int(c) for c in self.nodal_counts))

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "amplitudes": self.amplitudes.tolist(),
            "nodal_counts": list(self.nodal_counts),
            "boundary_residual": float(self.boundary_residual),
            "ode_residual": float(self.ode_residual),
            "energy": float(self.energy),
            "iterations": int(self.iterations),
        }


@dataclass(frozen=True)
class Bump:
    start: float
    end: float
    sign: int
    l4_norm: float


BumpDecomposition = list  # per-component list of Bump, ordered by radius

__all__ = [
    "Geometry", "SystemParams", "NodalProfile", "SampledProfile", "SolutionRecord",
    "Bump", "BumpDecomposition",
]
