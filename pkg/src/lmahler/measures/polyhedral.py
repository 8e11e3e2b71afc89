"""Exact integrals of e^{-f} and f e^{-f} for planar piecewise-affine f.

A polyhedral spec is a list of convex pieces (polygon, gradient, offset);
outside the pieces f is +inf. Pieces are clipped against half-planes, fanned
into triangles, and each triangle is integrated in closed form through
divided differences of the exponential.
"""
import math

import numpy as np

from ..convex_core.geometry import ConeRegion

TAYLOR_SPAN = 0.1


def clip_halfplane(poly, a, c=0.0):
    """Part of a convex polygon with <a, x> >= c (Sutherland-Hodgman, one edge)."""
    if len(poly) == 0:
        return poly
    out = []
    vals = poly @ a - c
    m = len(poly)
    for i in range(m):
        p, q = poly[i], poly[(i + 1) % m]
        vp, vq = vals[i], vals[(i + 1) % m]
        if vp >= 0:
            out.append(p)
        if (vp >= 0) != (vq >= 0):
            t = vp / (vp - vq)
            out.append(p + t * (q - p))
    return np.array(out) if out else np.zeros((0, 2))


def clip_box(poly, L):
    for a in ([1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]):
        poly = clip_halfplane(poly, np.array(a), -L)
    return poly


def polygon_area(poly):
    if len(poly) < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _dd1(z1, z2):
    # first divided difference of e^{-z}, z1 <= z2
    return -math.exp(-z1) * (1.0 if z2 == z1 else -math.expm1(-(z2 - z1)) / (z2 - z1))


def _dd2_shifted(w1, w2):
    # second divided difference of e^{-w} at (0, w1, w2), 0 <= w1 <= w2
    if w2 < TAYLOR_SPAN:
        total, fact = 0.0, 2.0
        for k in range(20):
            hk = sum(w1 ** i * w2 ** (k - i) for i in range(k + 1))
            total += (-1) ** k * hk / fact
            fact *= k + 3
        return total
    return (_dd1(w1, w2) - _dd1(0.0, w1)) / w2


def triangle_integrals(z):
    """(int_T e^{-l}, int_T l e^{-l}) over a triangle of unit-normalised area 1/2.

    ``z`` holds the values of the affine l at the three vertices; multiply by
    2 |T| for a triangle of area |T|.
    """
    z0, z1, z2 = sorted(float(v) for v in z)
    w1, w2 = z1 - z0, z2 - z0
    e0 = math.exp(-z0)
    if e0 == 0.0:
        return 0.0, 0.0
    E012 = e0 * _dd2_shifted(w1, w2)
    E12 = e0 * _dd1(w1, w2)
    # l e^{-l} is the second derivative of (z + 2) e^{-z}; Leibniz rule for divided differences
    return E012, (z0 + 2.0) * E012 + E12


def polygon_integrals(poly, g, c, t=1.0):
    """(int e^{-t f}, int t f e^{-t f}) over a convex polygon where f = <g, x> + c."""
    if len(poly) < 3:
        return 0.0, 0.0
    vals = t * (poly @ g + c)
    m = e = 0.0
    for i in range(1, len(poly) - 1):
        tri = poly[[0, i, i + 1]]
        area = abs(polygon_area(tri))
        if area == 0.0:
            continue
        a, b = triangle_integrals(vals[[0, i, i + 1]])
        m += 2 * area * a
        e += 2 * area * b
    return m, e


def _low_vertex_outside(spec, L, level):
    # edge sampling can miss thin slivers of the domain; piece vertices cannot
    for poly, g, c in spec.pieces(L):
        poly = np.asarray(poly, dtype=float)
        low = poly @ np.asarray(g, dtype=float) + c < level
        if np.any(np.abs(poly[low]) > L):
            return True
    return False


def box_radius(spec, level=800.0):
    """Half-width L with f >= level on the boundary of [-L, L]^2."""
    L = 1.0
    edge = np.linspace(-1, 1, 401)
    while True:
        pts = np.concatenate([
            np.column_stack([edge * L, np.full_like(edge, L)]),
            np.column_stack([np.full_like(edge, L), edge * L]),
        ])
        if np.min(spec.evaluate(pts)) >= level and not _low_vertex_outside(spec, L, level):
            return L
        L *= 2
        if L > 1e12:
            raise ValueError("spec does not grow; no exact integration box")


def _halfplanes(region):
    if region is None:
        return []
    if isinstance(region, ConeRegion):
        return region.halfplanes()
    return list(region)


def exact_integrals(spec, region=None, t=1.0, L=None):
    """Exact (mass, entropy) of a polyhedral planar spec over a cone."""
    if not spec.polyhedral:
        raise ValueError(f"{spec.kind} is not polyhedral")
    if L is None:
        L = box_radius(spec)
    planes = _halfplanes(region)
    m = e = 0.0
    for poly, g, c in spec.pieces(L):
        piece = clip_box(np.asarray(poly, dtype=float), L)
        for a in planes:
            piece = clip_halfplane(piece, np.asarray(a, dtype=float))
        pm, pe = polygon_integrals(piece, np.asarray(g, dtype=float), float(c), t)
        m += pm
        e += pe
    return m, e


def exact_mass(spec, region=None, t=1.0):
    return exact_integrals(spec, region, t)[0]


def ray_integral(spec, u):
    """int_0^inf e^{-f(r u)} dr for specs that are linear along rays."""
    prof = spec.ray(np.asarray(u, dtype=float))
    if prof is None:
        raise ValueError(f"{spec.kind} has no ray profile")
    slope, reach = prof
    if slope == 0:
        return reach
    if math.isinf(reach):
        return 1.0 / slope
    return -math.expm1(-slope * reach) / slope


def polar_polygon(vertices):
    """Vertices of the polar of a centrally symmetric polygon given by its vertices."""
    from scipy.spatial import ConvexHull

    hull = ConvexHull(vertices)
    out = []
    for eq in hull.equations:
        nrm, off = eq[:2], eq[2]
        out.append(nrm / -off)
    pts = np.array(out)
    ang = np.arctan2(pts[:, 1], pts[:, 0])
    return pts[np.argsort(ang)]
