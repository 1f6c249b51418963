"""Translating-soliton solver and verification harness for Gauss curvature flow graphs."""

from .domains import ConvexDomain, DomainError, standard_family
from .grids import (BAND, EXTERIOR, INTERIOR, Grid, ScalarField, StencilSet,
                    field_from_function)
from .solver import (SolverConfig, SolverResult, radial_height, radial_heights,
                     radial_profile, solve_capped, solve_translator,
                     soliton_residual)

__all__ = [
    "ConvexDomain", "DomainError", "standard_family",
    "Grid", "ScalarField", "StencilSet", "field_from_function",
    "BAND", "EXTERIOR", "INTERIOR",
    "SolverConfig", "SolverResult", "solve_translator", "solve_capped",
    "radial_profile", "radial_height", "radial_heights", "soliton_residual",
]
