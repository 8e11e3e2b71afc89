"""Weighted boundary fluxes over coordinate cones and gradient images.

V_S(f) = int_S n_S e^{-f} and Q_S(f) = int_S <y, n_S> e^{-f} for oriented
surfaces S. Boundaries of orthants are unions of coordinate faces, on which
the flux reduces to section masses and Q vanishes identically.
"""
from dataclasses import dataclass

import numpy as np

from ..convex_core.geometry import ConeRegion
from ..convex_core.grid import GridFunction, sample
from ..legendre.transform import section as grid_section
from .quadrature import _trap_weights, region_integrals


@dataclass
class FluxResult:
    vector_flux: np.ndarray
    scalar_moment: float
    surface: str

    def to_dict(self):
        return {"vector_flux": list(map(float, self.vector_flux)), "scalar_moment": self.scalar_moment,
                "surface": self.surface}


def _face_signs(signs, i):
    return tuple(s for k, s in enumerate(signs) if k != i)


def section_mass(f, i, signs, n=None):
    """int over the orthant of e_i^perp with the given signs of e^{-f_i}."""
    sub = _face_signs(signs, i)
    if isinstance(f, GridFunction):
        sec = grid_section(f, i)
        return region_integrals(sec, ConeRegion.orthant(sub))[0]
    n = f.ndim(n)
    sec = f if f.dim is None else f.section(i)
    if n == 2:
        from ..equipartition import half_axis_integral

        return half_axis_integral(sec, np.array([float(sub[0])]))
    if n == 3 and sec.polyhedral:
        from .polyhedral import exact_integrals

        return exact_integrals(sec, ConeRegion.orthant(sub))[0]
    from .integrals import default_grid

    g = sample(sec, default_grid(sec, n - 1), n - 1)
    return region_integrals(g, ConeRegion.orthant(sub))[0]


def boundary_flux_quadrant(f, signs, i=None, n=None):
    """V over the boundary of the orthant with the given signs (outward normals).

    Component i is -signs[i] times the section mass over the face. Q is 0 on
    boundaries of cones with apex at the origin and is returned as such.
    """
    signs = tuple(int(s) for s in signs)
    dim = len(signs)
    if i is not None:
        return -signs[i] * section_mass(f, i, signs, n or dim)
    v = np.array([-signs[k] * section_mass(f, k, signs, n or dim) for k in range(dim)])
    return FluxResult(v, 0.0, f"boundary of orthant {signs}")


def boundary_moment_quadrant(f, signs):
    """Q over the orthant boundary computed face by face (slow path).

    On the face x_i = 0 the outward normal is -signs[i] e_i and <y, n> = -signs[i] y_i = 0,
    so each face integral is evaluated literally at the section nodes.
    """
    if not isinstance(f, GridFunction):
        raise TypeError("the slow path works on grids")
    total = 0.0
    for i, s in enumerate(signs):
        sec = grid_section(f, i)
        pts = np.insert(sec.points(), i, 0.0, axis=-1)
        normal = np.zeros(f.dim)
        normal[i] = -s
        w = _trap_weights(sec)
        sub = _face_signs(signs, i)
        inside = np.all(np.asarray(sub) * sec.points() >= 0, axis=-1)
        fin = np.isfinite(sec.values)
        dens = np.where(fin, np.exp(-np.where(fin, sec.values, 0.0)), 0.0)
        total += float(np.sum(w * inside * (pts @ normal) * dens))
    return total


def _section_dual_reach(sec, level=45.0, nodes=4097):
    """Largest |y| with L(f_i)(y) <= level, from a fine 1D conjugate."""
    from ..legendre.transform import conjugate
    from .integrals import default_grid

    g = sample(sec, default_grid(sec, 1, nodes), 1)
    Lg = conjugate(g, extend=True, evaluate=sec.evaluate)
    ys = Lg.coords[0][Lg.values <= level]
    return float(np.max(np.abs(ys)))


def _image_curve(spec, signs, i, samples, chart=None):
    """Chart of grad f on the face of the orthant in e_i^perp, ordered away from 0."""
    from ..legendre.chart import gradient_chart

    j = 1 - i
    if chart is None:
        sec = spec if spec.dim is None else spec.section(i)
        reach = _section_dual_reach(sec)
        s = signs[j] * np.linspace(0.0, reach, samples)
        chart = gradient_chart(spec, i, s[:, None], n=2, certify=False)
    s = chart.samples[:, 0]
    order = np.argsort(signs[j] * s)
    z = chart.inverse[order, 0]
    s, t = s[order], chart.t[order]
    pts = np.insert(z[:, None], i, 0.0, axis=-1)
    # Lf(grad f(z)) = <z, grad f(z)> - f(z) with z on the face
    dual = z * s - np.asarray(spec.evaluate(pts), dtype=float)
    return s, t, dual


def boundary_flux_gradient_image(spec, signs, i, chart=None, samples=2049, n=None):
    """<V_{grad f(orthant ∩ e_i^perp)}(Lf), e_i> through the gradient chart (planar f).

    Integrates e^{-Lf(y + t_i(y) e_i)} over the half line of e_i^perp with sign
    signs[j], j != i, and returns it with the sign -signs[i].
    """
    from scipy.integrate import simpson

    if spec.ndim(n or len(signs)) != 2:
        raise ValueError("the gradient-image flux is implemented in the plane")
    j = 1 - i
    s, _, dual = _image_curve(spec, signs, i, samples, chart)
    return -signs[i] * float(simpson(np.exp(-dual), x=signs[j] * s))


def gradient_image_flux(spec, signs, samples=2049):
    """V and Q of Lf over the boundary of grad f(orthant), planar smooth f.

    The boundary consists of the curves s -> s e_j + t_i(s) e_i; their outward
    element is -signs[i] (e_i - t_i'(s) e_j) ds.
    """
    from scipy.integrate import simpson

    signs = tuple(int(v) for v in signs)
    V = np.zeros(2)
    Q = 0.0
    for i in range(2):
        j = 1 - i
        s, t, dual = _image_curve(spec, signs, i, samples)
        u = signs[j] * s
        dt = np.gradient(t, s)
        w = np.exp(-dual)
        V[i] += -signs[i] * simpson(w, x=u)
        V[j] += signs[i] * simpson(dt * w, x=u)
        Q += -signs[i] * simpson((t - s * dt) * w, x=u)
    return FluxResult(V, float(Q), f"boundary of the gradient image of orthant {signs}")


def green_identities(spec, signs, n=None, nodes=None):
    """Both sides of int_A grad f dmu = -V_{dA}(f) and int_A <x, grad f> dmu = n mu(A) - Q_{dA}(f).

    A is the orthant with the given signs; the left sides use trapezoid
    quadrature on a grid, the right sides section masses.
    """
    from .integrals import default_grid

    signs = tuple(int(s) for s in signs)
    n = spec.ndim(n or len(signs))
    axes = default_grid(spec, n, nodes)
    f = sample(spec, axes, n)
    pts = f.points()
    grad = np.asarray(spec.grad(pts.reshape(-1, n)), dtype=float).reshape(pts.shape)
    inside = np.all(np.asarray(signs) * pts >= 0, axis=-1)
    # orthant-restricted trapezoid: halve weights on the faces through the origin
    w = _trap_weights(f) * inside
    for k in range(n):
        w = np.where(pts[..., k] == 0, 0.5 * w, w)
    dens = np.where(np.isfinite(f.values), np.exp(-np.where(np.isfinite(f.values), f.values, 0.0)), 0.0)
    lhs_vec = np.array([np.sum(w * dens * grad[..., k]) for k in range(n)])
    lhs_moment = float(np.sum(w * dens * np.sum(pts * grad, axis=-1)))
    flux = boundary_flux_quadrant(spec, signs, n=n)
    mu = float(np.sum(w * dens))
    return {
        "gradient_integral": lhs_vec,
        "minus_flux": -flux.vector_flux,
        "moment_integral": lhs_moment,
        "n_mass_minus_Q": n * mu - flux.scalar_moment,
    }
