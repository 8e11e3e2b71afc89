"""Equipartition positions of even log-concave functions.

In the plane a position is built explicitly: a direction u whose cone
C_{u, v(u)} carries a quarter of both the mass and the entropy, followed by a
diagonal rescaling that normalises the half-axis integrals. In any dimension
the equipartition conditions can be checked.

Cone integrals come from exact polygon clipping for polyhedral specs and from
a polar profile (radial Gauss-Legendre per angle, periodic spline in the
angle) otherwise.
"""
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .convex_core.geometry import ConeRegion, LinearMap, sign_patterns
from .convex_core.grid import GrowthError, make_axes, sample
from .convex_core.specs import Composed, GridSpec, Shifted
from .measures import polyhedral
from .measures.quadrature import integrate

GL_X, GL_W = np.polynomial.legendre.leggauss(64)
LEVEL = 60.0
ANGLE_TOL = 1e-10
SCAN_COUNT = 720
E = math.e


class NonConvergenceError(RuntimeError):
    pass


def _unit(theta):
    return np.array([math.cos(theta), math.sin(theta)])


def _directions(theta):
    theta = np.asarray(theta, dtype=float)
    return np.stack([np.cos(theta), np.sin(theta)], axis=-1)


def ray_reach(spec, dirs, level=LEVEL):
    """Radius where r -> f(r v) first reaches ``level`` (or leaves the domain)."""
    dirs = np.atleast_2d(np.asarray(dirs, dtype=float))
    lo = np.zeros(len(dirs))
    hi = np.ones(len(dirs))
    done = np.zeros(len(dirs), dtype=bool)
    for _ in range(200):
        done = spec.evaluate(hi[:, None] * dirs) >= level
        if done.all():
            break
        lo = np.where(done, lo, hi)
        hi = np.where(done, hi, 2 * hi)
    if not done.all():
        raise GrowthError("f stays bounded along some ray; e^{-f} is not integrable")
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        up = spec.evaluate(mid[:, None] * dirs) >= level
        hi = np.where(up, mid, hi)
        lo = np.where(up, lo, mid)
    return hi


def ray_moments(spec, dirs, power=1, level=LEVEL):
    """Per direction v: (int r^power e^{-f(r v)} dr, int r^power f e^{-f} dr) over r >= 0.

    Composite Gauss-Legendre on [0, reach] split at the kinks the spec reports.
    """
    dirs = np.atleast_2d(np.asarray(dirs, dtype=float))
    R = ray_reach(spec, dirs, level)
    knots = [np.zeros_like(R), R]
    br = spec.ray_breaks(dirs)
    if br is not None:
        br = np.where(np.isfinite(br), br, np.inf)
        knots.append(np.minimum(br, R[:, None]))
    knots = np.sort(np.column_stack(knots), axis=1)
    a, b = knots[:, :-1], knots[:, 1:]
    half = 0.5 * (b - a)
    r = a[..., None] + half[..., None] * (GL_X + 1)
    w = half[..., None] * GL_W
    vals = spec.evaluate(r[..., None] * dirs[:, None, None, :])
    fin = np.isfinite(vals)
    v = np.where(fin, vals, 0.0)
    ex = np.where(fin, np.exp(-v), 0.0)
    wr = w * r ** power
    return np.sum(wr * ex, axis=(1, 2)), np.sum(wr * v * ex, axis=(1, 2))


def half_axis_integral(spec, u):
    """int_0^inf e^{-f(r u)} dr."""
    if spec.ray(np.asarray(u, dtype=float)) is not None:
        return polyhedral.ray_integral(spec, u)
    return float(ray_moments(spec, np.asarray(u, dtype=float)[None, :], power=0)[0][0])


class PolarProfile:
    """Cone integrals of a planar spec from its angular mass and entropy densities."""

    method = "polar"

    def __init__(self, spec, count=2048):
        self.spec, self.count = spec, int(count)
        theta = 2 * np.pi * np.arange(self.count) / self.count
        m, e = ray_moments(spec, _directions(theta))
        knots = np.append(theta, 2 * np.pi)
        self._m = CubicSpline(knots, np.append(m, m[0]), bc_type="periodic").antiderivative()
        self._e = CubicSpline(knots, np.append(e, e[0]), bc_type="periodic").antiderivative()
        self.total = (float(self._m(2 * np.pi)), float(self._e(2 * np.pi)))

    def _cum(self, F, tot, x):
        k = math.floor(x / (2 * np.pi))
        return float(F(x - 2 * np.pi * k)) + k * tot

    def cone(self, a, b):
        """(mass, entropy) of the cone swept counterclockwise from angle a to angle b."""
        return (self._cum(self._m, self.total[0], b) - self._cum(self._m, self.total[0], a),
                self._cum(self._e, self.total[1], b) - self._cum(self._e, self.total[1], a))


class ExactCones:
    """Cone integrals of a polyhedral planar spec by polygon clipping."""

    method = "exact"

    def __init__(self, spec):
        self.spec = spec
        L = polyhedral.box_radius(spec)
        self.pieces = []
        for poly, g, c in spec.pieces(L):
            poly = polyhedral.clip_box(np.asarray(poly, dtype=float), L)
            if len(poly) >= 3:
                self.pieces.append((poly, np.asarray(g, dtype=float), float(c)))
        self.total = self._clipped([])

    def _clipped(self, planes):
        m = e = 0.0
        for poly, g, c in self.pieces:
            for a in planes:
                poly = polyhedral.clip_halfplane(poly, a)
            pm, pe = polyhedral.polygon_integrals(poly, g, c)
            m += pm
            e += pe
        return m, e

    def cone(self, a, b):
        span = b - a
        if span <= 0:
            return 0.0, 0.0
        if span > np.pi:
            m, e = self.cone(b, a + 2 * np.pi)
            return self.total[0] - m, self.total[1] - e
        u, v = _unit(a), _unit(b)
        return self._clipped([np.array([-u[1], u[0]]), np.array([v[1], -v[0]])])


def cone_measure(spec, count=2048, exact=None):
    if exact is None:
        exact = spec.polyhedral and spec.pieces(1.0) is not None
    return ExactCones(spec) if exact else PolarProfile(spec, count)


def _origin_value(spec, n):
    return float(np.asarray(spec.evaluate(np.zeros((1, n)))).reshape(-1)[0])


def _normalised(spec, n=2):
    if _origin_value(spec, spec.ndim(n)) != 0.0:
        return Shifted(spec, n)
    return spec


def _v_angle(measure, theta, guess=None):
    quarter = measure.total[0] / 4

    def h(t):
        return measure.cone(theta, t)[0] - quarter

    lo, hi = theta, theta + np.pi
    if guess is not None:
        a, b = max(lo, guess - 1e-3), min(hi, guess + 1e-3)
        if h(a) < 0 < h(b):
            lo, hi = a, b
    if not h(lo) < 0 < h(hi):
        raise NonConvergenceError("cone mass does not bracket a quarter of the total")
    return brentq(h, lo, hi, xtol=ANGLE_TOL * 1e-2, rtol=4 * np.finfo(float).eps)


def v_of_u(spec, u, measure=None):
    """Unit v with the cone from u to v carrying a quarter of the mass."""
    measure = measure or cone_measure(_normalised(spec))
    u = np.asarray(u, dtype=float)
    return _unit(_v_angle(measure, math.atan2(u[1], u[0])))


def _g(measure, theta, guess=None):
    t = _v_angle(measure, theta, guess)
    return measure.cone(theta, t)[1] - measure.total[1] / 4, t


def _direction_angle(spec, measure, profile=None, count=SCAN_COUNT):
    scale = abs(measure.total[1]) + measure.total[0]
    ztol = 1e-12 * scale
    g0 = _g(measure, 0.0)[0]
    if abs(g0) <= ztol:
        return 0.0
    scan = profile or measure
    thetas = np.pi * np.arange(count + 1) / count
    gs = np.array([_g(scan, th)[0] for th in thetas[:-1]] + [0.0])
    gs[-1] = gs[0]
    guesses = {}

    def gx(th):
        val, t = _g(measure, th, guesses.get("v"))
        guesses["v"] = t
        return val

    for k in range(count):
        if gs[k] == 0 or gs[k] * gs[k + 1] < 0:
            lo, hi = thetas[k], thetas[k + 1]
            # widen until the accurate measure brackets as well
            for w in range(4):
                glo, ghi = gx(lo), gx(hi)
                if glo == 0:
                    return lo
                if glo * ghi < 0:
                    return brentq(gx, lo, hi, xtol=ANGLE_TOL * 1e-2)
                step = (w + 1) * np.pi / count
                lo, hi = max(0.0, thetas[k] - step), min(np.pi, thetas[k + 1] + step)
    raise NonConvergenceError("no sign change of the entropy imbalance found")


def find_equipartition_direction(spec, count=2048):
    """Unit u with the cone from u to v(u) carrying a quarter of mass and entropy."""
    spec = _normalised(spec)
    measure = cone_measure(spec, count)
    profile = measure if isinstance(measure, PolarProfile) else PolarProfile(spec, 512)
    return _unit(_direction_angle(spec, measure, profile))


@dataclass
class EquipartitionReport:
    n: int
    residual_mass: float
    residual_entropy: float
    residual_axis: float
    origin_value: float
    error: float = 0.0
    method: str = "exact"
    T: LinearMap = None
    section_residuals: list = field(default_factory=list)

    @property
    def worst(self):
        vals = [self.residual_mass, self.residual_entropy, self.residual_axis, abs(self.origin_value)]
        vals += [s.worst for s in self.section_residuals]
        return max(vals)

    def tolerance(self, tol=1e-6):
        """Pass band: tol, or three times the quadrature error when that is larger."""
        return max(tol, 3 * self.error)

    def strong(self, tol=1e-6):
        return self.worst <= self.tolerance(tol) and all(s.strong(tol) for s in self.section_residuals)

    def equipartitioned(self, tol=1e-6):
        band = self.tolerance(tol)
        return self.residual_mass <= band and self.residual_entropy <= band

    def to_dict(self):
        return {
            "n": self.n,
            "T": None if self.T is None else self.T.entries.tolist(),
            "residual_mass": self.residual_mass,
            "residual_entropy": self.residual_entropy,
            "residual_axis": self.residual_axis,
            "origin_value": self.origin_value,
            "error": self.error,
            "method": self.method,
            "sections": [s.to_dict() for s in self.section_residuals],
        }

    def to_json(self):
        return json.dumps(self.to_dict())


def _residuals(masses, entropies, total_m, total_e, n):
    share = 2.0 ** -n
    rm = max(abs(m / total_m - share) for m in masses)
    if total_e == 0 and all(e == 0 for e in entropies):
        re = 0.0
    else:
        re = max(abs(e / total_e - share) for e in entropies)
    return rm, re


def _orthant_integrals_2d(measure):
    quads = [measure.cone(k * np.pi / 2, (k + 1) * np.pi / 2) for k in range(4)]
    return [q[0] for q in quads], [q[1] for q in quads]


def verify_equipartition(spec, n=2, recurse=True, count=4096, nodes=None, T=None):
    """Residuals of the (strong) equipartition conditions of spec; never raises on violation."""
    n = spec.ndim(n)
    origin = _origin_value(spec, n)
    axis = max(abs(half_axis_integral(spec, np.eye(n)[i]) - 1.0) for i in range(n))
    err = 0.0
    if n == 1:
        plus = ray_moments(spec, np.array([[1.0]]), power=0)
        minus = ray_moments(spec, np.array([[-1.0]]), power=0)
        ms, es = [plus[0][0], minus[0][0]], [plus[1][0], minus[1][0]]
        rm, re = _residuals(ms, es, sum(ms), sum(es), 1)
        method = "radial"
    elif n == 2:
        measure = cone_measure(spec, count)
        ms, es = _orthant_integrals_2d(measure)
        rm, re = _residuals(ms, es, measure.total[0], measure.total[1], 2)
        method = measure.method
        if method == "polar":
            coarse = PolarProfile(spec, count // 2)
            cm, ce = _orthant_integrals_2d(coarse)
            rm2, re2 = _residuals(cm, ce, coarse.total[0], coarse.total[1], 2)
            err = max(abs(rm - rm2), abs(re - re2))
    else:
        from .measures.integrals import default_grid

        f = sample(spec, default_grid(spec, n, nodes), n)
        ms, es, errs = [], [], []
        whole = integrate(f)
        for s in sign_patterns(n):
            q = integrate(f, ConeRegion.orthant(s))
            ms.append(q.mass)
            es.append(q.entropy)
            errs.append(max(q.mass_error / whole.mass, q.entropy_error / max(abs(whole.entropy), 1e-300)))
        rm, re = _residuals(ms, es, whole.mass, whole.entropy, n)
        err = max(errs)
        method = "grid"
    sections = []
    if recurse and n > 1:
        for i in range(n):
            sec = spec if spec.dim is None else spec.section(i)
            sections.append(verify_equipartition(sec, n - 1, True, count, nodes))
    return EquipartitionReport(n, rm, re, axis, origin, err, method, T, sections)


def strong_equipartition_map(spec, count=2048, exact=None):
    """Map T with f o T strongly equipartitioned (planar f), and its report."""
    n = spec.ndim(2)
    if n != 2:
        raise ValueError("positions are constructed in the plane only")
    spec = _normalised(spec)
    measure = cone_measure(spec, count, exact)
    profile = measure if isinstance(measure, PolarProfile) else PolarProfile(spec, 512)
    tu = _direction_angle(spec, measure, profile)
    tv = _v_angle(measure, tu)
    u, v = _unit(tu), _unit(tv)
    alpha = [half_axis_integral(spec, u), half_axis_integral(spec, v)]
    T = LinearMap(np.column_stack([alpha[0] * u, alpha[1] * v]))
    report = verify_equipartition(Composed(spec, T), 2, True, 2 * count)
    report.T = T
    return T, report


def growth_slope(spec, count=720):
    """Largest a with a|x| - 1 <= f(x), measured along a fan of rays."""
    spec = _normalised(spec)
    dirs = _directions(2 * np.pi * np.arange(count) / count)
    # the infimum may only be approached far out, so search up to a high level
    hi = ray_reach(spec, dirs, 1e6)
    lo = np.full_like(hi, 1e-12 * hi.max())
    invphi = (math.sqrt(5) - 1) / 2

    def obj(r):
        return (spec.evaluate(r[:, None] * dirs) + 1.0) / r

    a, b = lo, hi
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = obj(c), obj(d)
    for _ in range(120):
        left = fc <= fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        c_new = b - invphi * (b - a)
        d_new = a + invphi * (b - a)
        fc, fd = obj(c_new), obj(d_new)
        c, d = c_new, d_new
    best = np.minimum(np.minimum(fc, fd), obj(hi))
    return float(np.min(best))


@dataclass
class MoreauStep:
    m: float
    T: LinearMap
    report: EquipartitionReport
    norm: float
    bound: float
    volume_product: float
    volume_error: float

    @property
    def bounded(self):
        return self.norm <= self.bound

    def to_dict(self):
        return {
            "m": self.m,
            "T": self.T.entries.tolist(),
            "norm": self.norm,
            "bound": self.bound,
            "volume_product": self.volume_product,
            "volume_error": self.volume_error,
            "report": self.report.to_dict(),
        }


def moreau_box(spec, m, level=30.0):
    """Half-width outside which the Moreau regularisation exceeds ``level``."""
    spec = _normalised(spec)
    dirs = _directions(2 * np.pi * np.arange(720) / 720)
    return float(ray_reach(spec, dirs, level).max() * 1.01 + math.sqrt(2 * level / m))


def regularize_then_equipartition(spec, schedule=(1, 10, 100, 1000), nodes=513, count=2048):
    """For each m: regularise on a grid, construct T_m, and check ||T_m|| <= a/2 + 2/a."""
    from .legendre.transform import moreau_regularize
    from .measures.integrals import pair_from_grid

    spec = _normalised(spec)
    a = growth_slope(spec)
    bound = a / 2 + 2 / a
    steps = []
    for m in schedule:
        axes = make_axes(moreau_box(spec, m), nodes, 2)
        f = sample(spec, axes, 2)
        fm = moreau_regularize(f, float(m))
        fm = fm.with_values(fm.values - fm.values[fm.origin_index()])
        T, report = strong_equipartition_map(GridSpec(fm), count, exact=False)
        pair = pair_from_grid(fm, superlinear=True)
        vp = pair.primal()[0] * pair.dual()[0]
        steps.append(MoreauStep(float(m), T, report, T.column_norm(), bound, float(vp), float(pair.error_estimate()[2])))
    return steps


@dataclass
class EnvelopeCheck:
    lower_1d: float
    upper_1d: float
    lower_2d: float
    upper_2d: float
    mass: float
    slack: float = 1e-9

    @property
    def mass_ok(self):
        return 2 / E <= self.mass <= (2 * E * (E + 2)) ** 2

    @property
    def ok(self):
        worst = max(self.lower_1d, self.upper_1d, self.lower_2d, self.upper_2d)
        return worst <= self.slack and self.mass_ok

    def to_dict(self):
        return {k: getattr(self, k) for k in ("lower_1d", "upper_1d", "lower_2d", "upper_2d", "mass", "slack")}


def envelope_check(spec, T, nodes=401, width=None):
    """Worst violations of the envelope bounds of a strongly equipartitioned f o T.

    1D, along each half-axis: t - 1 <= h(t) and h(t) <= t on [0, 1].
    2D: ||x||_1 / (e + 2) - 2 <= f(x) and f <= 1 on the unit l1 ball.
    Violations are positive; 0 means the bound holds at every node.
    """
    psi = Composed(_normalised(spec), T)
    c = 1 / (E + 2)
    width = width or 2.0 / c + 2.0
    t = np.linspace(0.0, width, 4 * nodes + 1)
    low1 = up1 = -np.inf
    for i in range(2):
        for s in (1.0, -1.0):
            d = np.zeros(2)
            d[i] = s
            h = psi.evaluate(t[:, None] * d)
            low1 = max(low1, float(np.max((t - 1) - h)))
            inner = t <= 1
            up1 = max(up1, float(np.max(h[inner] - t[inner])))
    axes = make_axes(width, nodes, 2)
    pts = np.stack(np.meshgrid(axes[0].coords, axes[1].coords, indexing="ij"), axis=-1)
    vals = psi.evaluate(pts)
    l1 = np.abs(pts).sum(axis=-1)
    with np.errstate(invalid="ignore"):
        low2 = float(np.max(c * l1 - 2 - vals))
    ball = l1 <= 1
    up2 = float(np.max(vals[ball] - 1))
    measure = cone_measure(psi, 2048)
    return EnvelopeCheck(max(low1, 0.0), max(up1, 0.0), max(low2, 0.0), max(up2, 0.0), measure.total[0])
