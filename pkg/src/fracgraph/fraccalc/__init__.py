"""Riemann-Liouville fractional calculus on graded one-dimensional grids."""

from ._types import (End, EndpointLimit, FracOrder, Grid, GridFunction, PowerTerm, TraceKind,
                     as_end, as_order, graded_grid, interior_mask)
from .operators import (endpoint_trace, frac_deriv_left, frac_deriv_left_definition,
                        frac_deriv_right, frac_integral_left, frac_integral_right, gamma)

__all__ = [
    "End", "EndpointLimit", "FracOrder", "Grid", "GridFunction", "PowerTerm", "TraceKind",
    "as_end", "as_order", "graded_grid", "interior_mask",
    "endpoint_trace", "frac_deriv_left", "frac_deriv_left_definition", "frac_deriv_right",
    "frac_integral_left", "frac_integral_right", "gamma",
]
