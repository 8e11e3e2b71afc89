"""Even convex functions: exact catalog specs and sampled grids."""
from .geometry import ConeRegion, LinearMap, sign_patterns
from .grid import (
    Axis,
    GridFunction,
    GrowthError,
    UndersampledError,
    check_convex,
    circumradius,
    load_grid,
    make_axes,
    sample,
    save_grid,
    truncation_radius,
)
from .specs import (
    Composed,
    CubeIndicator,
    FunctionSpec,
    Gaussian,
    GridSpec,
    MaxAffine,
    Mixed,
    ParallelogramIndicator,
    ParallelogramNorm,
    PNorm,
    Quadratic,
    Section,
    Shifted,
    SpecError,
    compose_linear,
    evaluate,
    parse_spec,
)
