"""Exact, spectral and finite-difference solutions of open quantum Brownian
motion on the real line for a two-level internal degree of freedom."""

__version__ = "0.1.0"

from .core import (
    BlochField,
    Custom,
    DensityField,
    GaussianCoherent,
    GaussianMixture,
    InitialCondition,
    LaplaceCoherent,
    LaplaceMixture,
    Params,
    SpatialGrid,
    UniformMixture,
    from_bloch,
    plan_grid,
    sample_initial,
    to_bloch,
    validate_params,
)

__all__ = [
    "BlochField",
    "Custom",
    "DensityField",
    "GaussianCoherent",
    "GaussianMixture",
    "InitialCondition",
    "LaplaceCoherent",
    "LaplaceMixture",
    "Params",
    "SpatialGrid",
    "UniformMixture",
    "from_bloch",
    "plan_grid",
    "sample_initial",
    "to_bloch",
    "validate_params",
    "__version__",
]
