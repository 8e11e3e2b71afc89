"""Integrals of e^{-f}: masses, entropies, volume products, fluxes."""
from .flux import FluxResult, boundary_flux_gradient_image, boundary_flux_quadrant, green_identities
from .integrals import (
    DualPair,
    VolumeProduct,
    build_pair,
    gradient_partition,
    pair_from_grid,
    partial_product_F,
    volume_product,
    volume_product_scaled,
    vp_derivative_closed,
    vp_derivative_fd,
)
from .polyhedral import exact_integrals, exact_mass, ray_integral
from .quadrature import QuadResult, entropy_mass, integrate, mass, region_integrals

__all__ = [
    "DualPair",
    "FluxResult",
    "QuadResult",
    "VolumeProduct",
    "boundary_flux_gradient_image",
    "boundary_flux_quadrant",
    "build_pair",
    "entropy_mass",
    "exact_integrals",
    "exact_mass",
    "gradient_partition",
    "green_identities",
    "integrate",
    "mass",
    "pair_from_grid",
    "partial_product_F",
    "ray_integral",
    "region_integrals",
    "volume_product",
    "volume_product_scaled",
    "vp_derivative_closed",
    "vp_derivative_fd",
]
