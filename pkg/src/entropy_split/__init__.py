"""Entropy-stable summation-by-parts discretizations of the compressible
Euler and Navier-Stokes equations built on an entropy-split volume form.
"""
from .gas import AdmissibilityError, GasModel
from .mesh import build_mesh, compute_element_ops
from .operators import build_reference_ops, verify_operators
from .problems import get_problem
from .spatial import ConfigError, SchemeConfig, residual
from .timestepping import integrate

__version__ = "0.1.0"

__all__ = [
    "AdmissibilityError",
    "ConfigError",
    "GasModel",
    "SchemeConfig",
    "build_mesh",
    "build_reference_ops",
    "compute_element_ops",
    "get_problem",
    "integrate",
    "residual",
    "verify_operators",
]
