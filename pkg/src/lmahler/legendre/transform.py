"""Discrete Legendre transforms on product grids and the operations built on them."""
import math

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from ..convex_core.grid import Axis, GridFunction, direction_fan, sphere_area
from . import kernels

from scipy.special import gamma, gammaincc

DUAL_MARGIN = 1.05


class RangeClippingError(ValueError):
    """The dual box is narrower than the slope range of the primal data."""

    def __init__(self, axis, required, given):
        self.axis, self.required, self.given = axis, required, given
        super().__init__(
            f"dual range {given:.6g} on axis {axis} is below the primal slope range "
            f"{required:.6g}; use at least {DUAL_MARGIN * required:.6g}"
        )


def _lines(values, axis):
    moved = np.moveaxis(values, axis, -1)
    return moved.reshape(-1, moved.shape[-1]), moved.shape


def _unlines(flat, shape, axis):
    return np.moveaxis(flat.reshape(shape), -1, axis)


def slope_range(f):
    """Largest |divided difference| between adjacent finite nodes, per axis."""
    out = []
    for d, ax in enumerate(f.axes):
        v = np.moveaxis(f.values, d, -1)
        a, b = v[..., :-1], v[..., 1:]
        ok = np.isfinite(a) & np.isfinite(b)
        with np.errstate(invalid="ignore"):
            diff = np.abs(np.where(ok, b - a, 0.0)) / ax.step
        out.append(float(diff.max()) if diff.size else 0.0)
    return np.array(out)


def _runs_reach_ends(f, d):
    # True when every line along axis d with finite values covers the whole axis
    v = np.moveaxis(np.isfinite(f.values), d, -1).reshape(-1, f.shape[d])
    used = v.any(axis=1)
    return bool((v[used].all(axis=1)).all())


def _sublevel_width(f, level=1.0):
    """min over directions w of max <x, w> across nodes with f <= level."""
    pts = f.points()[f.values <= level]
    if f.dim == 1:
        return float(np.abs(pts).max())
    try:
        pts = pts[ConvexHull(pts).vertices]
    except (QhullError, ValueError):
        pass
    fan = direction_fan(f.dim, 180 if f.dim == 2 else 500)
    return float((pts @ fan.T).max(axis=0).min())


def _tail_radius(f, tol):
    # Lf(y) >= b|y| - 1 with b the sublevel width; Lf(y) <= rho |y| since f >= 0
    n = f.dim
    b = _sublevel_width(f)
    if not b > 0:
        # {f <= 1} has no interior at this resolution: no usable bound
        return math.inf
    rho = float(np.linalg.norm(f.points()[f.finite()], axis=-1).max())
    area = sphere_area(n)
    floor = area * gamma(n) / rho ** n

    def tail(Y):
        return math.e * area * gammaincc(n, b * Y) * gamma(n) / b ** n

    lo, hi = 0.0, 1.0 / b
    while tail(hi) > tol * floor:
        lo, hi = hi, 2 * hi
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        lo, hi = (lo, mid) if tail(mid) <= tol * floor else (mid, hi)
    return hi


def auto_dual_axes(f, counts=None, tail_tol=1e-7, truncate=False):
    """Dual axes covering the slope range; max slope lands exactly on a node.

    Axes on which some line has a bounded domain get a conjugate that grows
    linearly, so they are widened until the tail of e^{-Lf} is negligible.
    With ``truncate`` the box only needs to hold the mass of e^{-Lf}, so it is
    capped at the tail radius when that is smaller than the slope range.
    """
    counts = [a.count for a in f.axes] if counts is None else list(counts)
    slopes = slope_range(f)
    axes = []
    tail_y = None
    for d, (s, m) in enumerate(zip(slopes, counts)):
        half = m // 2
        need_tail = not _runs_reach_ends(f, d) or s == 0
        Y = 0.0
        if need_tail:
            if tail_y is None:
                tail_y = _tail_radius(f, tail_tol)
            if math.isinf(tail_y):
                raise ValueError("sublevel set {f <= 1} has no width on this grid; refine it")
            Y = tail_y
        if s > 0:
            k = int(math.floor(half / DUAL_MARGIN)) if Y <= DUAL_MARGIN * s else int(math.floor(half * s / Y))
            if k >= 1:
                Y = max(Y, s / k * half)
            else:
                Y = max(Y, DUAL_MARGIN * s)
        if Y == 0:
            Y = 1.0
        if truncate:
            if tail_y is None:
                tail_y = _tail_radius(f, tail_tol)
            Y = min(Y, tail_y)
        axes.append(Axis.symmetric(Y, m))
    return tuple(axes)


def _check_range(f, dual):
    slopes = slope_range(f)
    for d, (s, ax) in enumerate(zip(slopes, dual)):
        if s > ax.hi * (1 + 1e-12):
            raise RangeClippingError(d, s, ax.hi)


def conjugate_lines(values, x_axes, y_axes, extend=False, backend=None):
    """Per-axis factorised discrete conjugate of raw (possibly -inf) sample arrays.

    With ``extend`` a dual point is +inf when its lattice maximiser sits on
    the box boundary, i.e. the supremum is only cut off by the box.
    """
    g = np.asarray(values, dtype=float)
    n = g.ndim
    flag = None
    for d in range(n):
        lines, shape = _lines(g, d)
        h, idx = kernels.legendre_lines(x_axes[d].coords, lines, y_axes[d].coords, backend=backend)
        new_shape = shape[:-1] + (y_axes[d].count,)
        h = _unlines(h, new_shape, d)
        if extend:
            idx = _unlines(idx, new_shape, d)
            at_end = (idx == 0) | (idx == x_axes[d].count - 1)
            if flag is not None:
                prev = np.take_along_axis(flag, np.maximum(idx, 0), axis=d)
                at_end |= prev & (idx >= 0)
            flag = at_end
        g = -h if d < n - 1 else h
    if extend:
        g = np.where(flag, np.inf, g)
    return g


def _boundary_mask(shape):
    mask = np.zeros(shape, dtype=bool)
    for d in range(len(shape)):
        idx = [slice(None)] * len(shape)
        idx[d] = 0
        mask[tuple(idx)] = True
        idx[d] = -1
        mask[tuple(idx)] = True
    return mask


def recession_excess(f, dual, evaluate=None, backend=None):
    """max over box-boundary nodes x_b of <x_b, y> - s_b on the dual nodes.

    s_b is the secant slope of t -> f(t x_b) over [1 - 1/K, 1] (K nodes per
    half axis), a lower bound for the recession slope of f along x_b. A
    positive excess certifies that y lies outside the domain of the conjugate
    of any convex continuation of f.
    """
    lam = 1.0 - 1.0 / max(a.half for a in f.axes)
    pts = f.points()
    mask = _boundary_mask(f.shape) & f.finite()
    if evaluate is not None:
        # rays that leave the domain beyond the box have infinite recession slope
        for mu in (2.0, 8.0, 64.0):
            far = np.isfinite(evaluate(mu * pts[mask]))
            mask[mask] = far
    xb = pts[mask]
    inner = evaluate(lam * xb) if evaluate is not None else f.interpolate(lam * xb)
    slopes = np.full(f.shape, np.inf)
    slopes[mask] = (f.values[mask] - inner) / (1.0 - lam)
    if not mask.any():
        return np.full([a.count for a in dual], -np.inf), np.zeros(1)
    return conjugate_lines(slopes, f.axes, dual, backend=backend), slopes[mask]


def conjugate(f, dual=None, extend=False, check=True, evaluate=None, backend=None, recession=True):
    """Discrete Legendre transform of a GridFunction onto ``dual`` axes.

    Without ``extend`` the result is the exact lattice supremum
    max_x <x, y> - f(x). With ``extend`` the box is treated as a truncation
    of a function defined everywhere: dual points whose supremum runs into the
    box boundary, or that fail the recession test, are set to +inf. Keeping
    their finite lattice values would bias integrals of e^{-Lf} by O(1/R).
    ``evaluate`` (the exact function, if known) sharpens the recession test;
    ``recession=False`` skips it for inputs known to grow superlinearly.
    """
    if not f.finite().any():
        raise ValueError("cannot conjugate an all-infinite grid")
    dual = auto_dual_axes(f) if dual is None else tuple(dual)
    if len(dual) != f.dim:
        raise ValueError("dual grid dimension differs from the primal grid")
    if check:
        _check_range(f, dual)
    out = conjugate_lines(f.values, f.axes, dual, extend=extend, backend=backend)
    if (out == -np.inf).any():
        raise ValueError("conjugate is -inf somewhere; input has no finite values on a full slice")
    if extend and recession and (_boundary_mask(f.shape) & f.finite()).any():
        excess, sb = recession_excess(f, dual, evaluate, backend)
        tol = 1e-9 * (1.0 + float(np.abs(sb).max()))
        out = np.where(excess > tol, np.inf, out)
    return GridFunction(dual, out)


def conjugate_1d(f, dual=None, **kw):
    if f.dim != 1:
        raise ValueError("conjugate_1d expects a 1D grid")
    return conjugate(f, dual, **kw)


conjugate_nd = conjugate


def brute_force_conjugate(f, dual):
    """O(N M) lattice supremum; the oracle for the fast transform."""
    x = f.points().reshape(-1, f.dim)
    fv = f.values.reshape(-1)
    ok = np.isfinite(fv)
    x, fv = x[ok], fv[ok]
    y = GridFunction(dual, np.zeros([a.count for a in dual])).points().reshape(-1, f.dim)
    out = np.empty(len(y))
    for s in range(0, len(y), 2048):
        out[s:s + 2048] = np.max(y[s:s + 2048] @ x.T - fv[None, :], axis=1)
    return GridFunction(dual, out.reshape([a.count for a in dual]))


def convexify(f, max_sweeps=100, backend=None):
    """Greatest minorant that is discretely convex along every axis line."""
    v = np.array(f.values)
    for _ in range(max_sweeps):
        before = v.copy()
        for d, ax in enumerate(f.axes):
            lines, shape = _lines(v, d)
            env = kernels.lower_envelope_lines(ax.coords, lines, backend=backend)
            v = _unlines(np.minimum(lines, env), shape, d)
        if np.array_equal(before, v):
            break
    return f.with_values(v)


def biconjugate(f, dual=None, **kw):
    g = conjugate(f, dual, **kw)
    return conjugate(g, f.axes, check=False, **kw)


def inf_convolution(f, g, dual=None):
    """f □ g on the primal grid of f, computed as L(Lf + Lg)."""
    if f.axes != g.axes:
        raise ValueError("inf_convolution needs a common primal grid")
    if dual is None:
        da, db = auto_dual_axes(f), auto_dual_axes(g)
        dual = tuple(a if a.hi >= b.hi else b for a, b in zip(da, db))
    Lf = conjugate(f, dual, extend=True)
    Lg = conjugate(g, dual, extend=True)
    both = Lf.values + Lg.values
    out = conjugate_lines(both, dual, f.axes, extend=True)
    return GridFunction(f.axes, out)


def moreau_regularize(f, m):
    """|x|^2/(2m) + inf_z (f(z) + m|x - z|^2/2) at the nodes of f.

    Uses inf_z(...) = m|x|^2/2 - L(f + m|.|^2/2)(m x), which is an exact
    lattice infimum over the nodes z when the dual grid is m times the primal.
    """
    if not m > 0:
        raise ValueError("m must be positive")
    pts = f.points()
    sq = np.sum(pts * pts, axis=-1)
    g = f.values + 0.5 * m * sq
    scaled = tuple(Axis(m * a.lo, m * a.hi, a.count) for a in f.axes)
    Lg = conjugate_lines(g, f.axes, scaled)
    return f.with_values(sq / (2 * m) + 0.5 * m * sq - Lg)


def scale_values(f, t):
    """The sampled function t f on the same nodes."""
    return f.with_values(t * f.values)


def section(f, axis):
    """Slice x[axis] = 0 of a grid (the origin is always a node)."""
    if f.dim < 2:
        raise ValueError("sections need dim >= 2")
    idx = [slice(None)] * f.dim
    idx[axis] = f.axes[axis].half
    axes = f.axes[:axis] + f.axes[axis + 1:]
    return GridFunction(axes, f.values[tuple(idx)])


def project(f, axis):
    """Minimum over lines parallel to ``axis``."""
    if f.dim < 2:
        raise ValueError("projections need dim >= 2")
    axes = f.axes[:axis] + f.axes[axis + 1:]
    return GridFunction(axes, f.values.min(axis=axis))


class BoundaryError(ValueError):
    """Point too close to the edge of the domain for a difference stencil."""


def gradient(f, x):
    """Central differences with one grid step; the subgradient midpoint at kinks."""
    x = np.asarray(x, dtype=float)
    g = np.empty(f.dim)
    for d, ax in enumerate(f.axes):
        e = np.zeros(f.dim)
        e[d] = ax.step
        fp, fm = f.interpolate(x + e).reshape(-1)[0], f.interpolate(x - e).reshape(-1)[0]
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise BoundaryError(f"{x.tolist()} is within one step of the domain boundary")
        g[d] = (float(fp) - float(fm)) / (2 * ax.step)
    return g


def gradient_field(f):
    """Central-difference gradient at every node; NaN where the stencil leaves the domain."""
    out = np.full(f.shape + (f.dim,), np.nan)
    v = f.values
    for d, ax in enumerate(f.axes):
        fwd = [slice(None)] * f.dim
        bwd = [slice(None)] * f.dim
        mid = [slice(None)] * f.dim
        fwd[d], bwd[d], mid[d] = slice(2, None), slice(0, -2), slice(1, -1)
        with np.errstate(invalid="ignore"):
            diff = (v[tuple(fwd)] - v[tuple(bwd)]) / (2 * ax.step)
        diff[~np.isfinite(diff)] = np.nan
        out[tuple(mid) + (d,)] = diff
    return out


def gradient_cone_membership(Lf, y, signs, tol=1e-9):
    """Whether y lies in the gradient image of the orthant with sign pattern ``signs``."""
    g = gradient(Lf, y)
    return bool(np.all(np.asarray(signs) * g >= -tol))


def gradient_cone_mask(Lf, signs, tol=1e-9):
    """Node mask of the gradient image of an orthant (NaN stencils excluded)."""
    g = gradient_field(Lf)
    ok = ~np.isnan(g).any(axis=-1)
    with np.errstate(invalid="ignore"):
        inside = np.all(np.asarray(signs) * g >= -tol, axis=-1)
    return ok & inside
