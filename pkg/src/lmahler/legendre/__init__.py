"""Discrete Legendre transforms and gradient-map geometry."""
from .kernels import BACKEND
from .transform import (
    BoundaryError,
    RangeClippingError,
    auto_dual_axes,
    biconjugate,
    brute_force_conjugate,
    conjugate,
    conjugate_1d,
    conjugate_nd,
    convexify,
    gradient,
    gradient_cone_mask,
    gradient_cone_membership,
    gradient_field,
    inf_convolution,
    moreau_regularize,
    project,
    section,
    slope_range,
)
from .chart import ChartError, GradientChart, conjugate_value, gradient_chart, solve_section_gradient
