"""Shooting solver for sign-changing radial solutions of coupled cubic
Schrödinger systems on the unit ball in R³, with entire-space trajectory
classification."""
__version__ = "0.1.0"

from ._jit import BACKEND
from .model import Geometry, NodalProfile, SampledProfile, SolutionRecord, SystemParams
from .ode import IntegratorConfig, IntegrationError, integrate, integrate_with_sensitivity, shoot
from .scalar import find_amplitude, nondegeneracy_scalar, shoot_scalar, tanaka_transform
from .system import continue_in_beta, linearized_boundary_map, newton_refine, uniqueness_sweep
from .liouville import apriori_sweep, classify_entire, liouville_sweep

__all__ = [
    "BACKEND", "Geometry", "NodalProfile", "SampledProfile", "SolutionRecord", "SystemParams",
    "IntegratorConfig", "IntegrationError", "integrate", "integrate_with_sensitivity", "shoot",
    "find_amplitude", "nondegeneracy_scalar", "shoot_scalar", "tanaka_transform",
    "continue_in_beta", "linearized_boundary_map", "newton_refine", "uniqueness_sweep",
    "apriori_sweep", "classify_entire", "liouville_sweep",
]
