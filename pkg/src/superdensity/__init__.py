"""Numerical laboratory for m-density points and density-degree functions."""
__version__ = "0.1.0"

from .measure_core import (Ball, Box, ContractViolation, GridRegion, ImplicitRegion, Measurement,
                           QuadratureSpec, complement, dilate, grid_measure, intersect, rasterize,
                           residual_measure, translate, union)
from .density import (DegreeEstimate, DensityQuotient, RadiusLadder, characterization_check,
                      degree_law_suite, density_quotient, equivalence_invariance_check,
                      estimate_degree, is_m_density_point, test_function_residual)
