"""Pseudospectral simulator and modified-scattering diagnostics for 1D cubic NLS and Hartree equations."""

__version__ = "0.1.0"

from .spectral import (
    ComplexField,
    Grid,
    NormReport,
    compute_norms,
    dispersive_ratio,
    forward_transform,
    free_asymptotic,
    free_propagate,
    inverse_transform,
)

__all__ = [
    "__version__",
    "ComplexField",
    "Grid",
    "NormReport",
    "compute_norms",
    "dispersive_ratio",
    "forward_transform",
    "free_asymptotic",
    "free_propagate",
    "inverse_transform",
]
