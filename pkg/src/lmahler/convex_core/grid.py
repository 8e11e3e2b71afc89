"""Uniform zero-centred grids of extended-real samples."""
import math
import struct
from dataclasses import dataclass
from itertools import product

import numpy as np
from scipy.special import gammaincc, gamma

MAGIC = b"LMGF"
VERSION = 1


@dataclass(frozen=True)
class Axis:
    """Symmetric axis with an odd node count; node k sits at step * (k - count // 2)."""

    lo: float
    hi: float
    count: int

    def __post_init__(self):
        if self.count < 3 or self.count % 2 == 0:
            raise ValueError(f"axis count must be odd and >= 3, got {self.count}")
        if not (self.hi > 0 and self.lo == -self.hi):
            raise ValueError(f"axis must be symmetric about 0, got [{self.lo}, {self.hi}]")

    @classmethod
    def symmetric(cls, half_width, count):
        if count < 3 or count % 2 == 0:
            raise ValueError(f"axis count must be odd and >= 3, got {count}")
        k = count // 2
        step = float(half_width) / k
        return cls(-step * k, step * k, int(count))

    @property
    def half(self):
        return self.count // 2

    @property
    def step(self):
        return self.hi / self.half

    @property
    def coords(self):
        return self.step * (np.arange(self.count) - self.half)

    def subsample(self):
        """Every other node; needs count = 1 mod 4 so that 0 stays a node."""
        if self.count % 4 != 1:
            raise ValueError("subsampling needs count = 1 mod 4")
        return Axis(self.lo, self.hi, (self.count + 1) // 2)


def make_axes(half_widths, counts, n=None):
    if np.isscalar(half_widths):
        half_widths = [half_widths] * (n or 1)
    if np.isscalar(counts):
        counts = [counts] * len(half_widths)
    return tuple(Axis.symmetric(r, c) for r, c in zip(half_widths, counts))


class GridFunction:
    """Samples of an extended-real function on a product of symmetric axes."""

    def __init__(self, axes, values, even_flag=None):
        self.axes = tuple(axes)
        if not 1 <= len(self.axes) <= 3:
            raise ValueError("grids are 1, 2 or 3 dimensional")
        v = np.array(values, dtype=float).reshape([a.count for a in self.axes])
        if np.isnan(v).any():
            raise ValueError("grid values contain NaN")
        if (v == -np.inf).any():
            raise ValueError("grid values contain -inf")
        v.setflags(write=False)
        self.values = v
        exact = bool(np.array_equal(v, v[(slice(None, None, -1),) * v.ndim]))
        if even_flag and not exact:
            raise ValueError("even_flag set but values are not symmetric")
        self.even_flag = exact if even_flag is None else bool(even_flag)

    @property
    def dim(self):
        return len(self.axes)

    @property
    def shape(self):
        return self.values.shape

    @property
    def coords(self):
        return [a.coords for a in self.axes]

    @property
    def steps(self):
        return np.array([a.step for a in self.axes])

    @property
    def half_widths(self):
        return np.array([a.hi for a in self.axes])

    def points(self):
        mesh = np.meshgrid(*self.coords, indexing="ij")
        return np.stack(mesh, axis=-1)

    def finite(self):
        return np.isfinite(self.values)

    def with_values(self, values):
        return GridFunction(self.axes, values)

    def origin_index(self):
        return tuple(a.half for a in self.axes)

    def subsample(self):
        sl = tuple(slice(None, None, 2) for _ in self.axes)
        return GridFunction([a.subsample() for a in self.axes], self.values[sl])

    def interpolate(self, x):
        """Multilinear interpolation; +inf outside the box or next to +inf nodes."""
        x = np.asarray(x, dtype=float)
        pts = x.reshape(-1, self.dim)
        idx, frac = [], []
        outside = np.zeros(len(pts), dtype=bool)
        for d, ax in enumerate(self.axes):
            u = (pts[:, d] - ax.lo) / ax.step
            outside |= (u < -1e-9) | (u > ax.count - 1 + 1e-9)
            i = np.clip(np.floor(u).astype(int), 0, ax.count - 2)
            idx.append(i)
            frac.append(np.clip(u - i, 0.0, 1.0))
        vals = np.where(np.isfinite(self.values), self.values, 0.0)
        bad = ~np.isfinite(self.values)
        out = np.zeros(len(pts))
        hit = np.zeros(len(pts), dtype=bool)
        for corner in product((0, 1), repeat=self.dim):
            w = np.ones(len(pts))
            ii = []
            for d, c in enumerate(corner):
                w = w * (frac[d] if c else 1.0 - frac[d])
                ii.append(idx[d] + c)
            ii = tuple(ii)
            out += w * vals[ii]
            hit |= (w > 0) & bad[ii]
        out[hit | outside] = np.inf
        return out.reshape(x.shape[:-1]) if x.ndim > 1 else out

    # binary container ---------------------------------------------------
    def to_bytes(self):
        head = MAGIC + struct.pack("<II", VERSION, self.dim)
        for a in self.axes:
            head += struct.pack("<ddQ", a.lo, a.hi, a.count)
        head += struct.pack("<B", int(self.even_flag))
        return head + self.values.astype("<f8").tobytes(order="C")

    @classmethod
    def from_bytes(cls, data):
        if data[:4] != MAGIC:
            raise ValueError("not a grid container")
        version, dim = struct.unpack_from("<II", data, 4)
        if version != VERSION:
            raise ValueError(f"unsupported container version {version}")
        off, axes = 12, []
        for _ in range(dim):
            lo, hi, count = struct.unpack_from("<ddQ", data, off)
            axes.append(Axis(lo, hi, int(count)))
            off += 24
        (even,) = struct.unpack_from("<B", data, off)
        values = np.frombuffer(data, dtype="<f8", offset=off + 1)
        if values.size != math.prod(a.count for a in axes):
            raise ValueError("container size does not match header")
        return cls(axes, values.astype(float), even_flag=bool(even))


def save_grid(grid, path):
    with open(path, "wb") as fh:
        fh.write(grid.to_bytes())


def load_grid(path):
    with open(path, "rb") as fh:
        return GridFunction.from_bytes(fh.read())


class UndersampledError(ValueError):
    """The grid box misses part of a bounded domain."""


def _domain_vertices(spec, n):
    if not spec.bounded:
        return None
    try:
        v = spec.vertices(n) if spec.kind == "cube_indicator" else spec.vertices()
    except TypeError:
        v = spec.vertices()
    return v


def sample(spec, axes, n=None):
    """Evaluate ``spec`` at every node of the product grid ``axes``."""
    axes = tuple(axes)
    n = spec.ndim(n if n is not None else len(axes))
    if n != len(axes):
        raise ValueError("spec dimension and grid dimension differ")
    verts = _domain_vertices(spec, n)
    if verts is not None:
        half = np.array([a.hi for a in axes])
        if (np.abs(verts) > half * (1 + 1e-12)).any():
            raise UndersampledError("grid box does not contain the domain of the spec")
    g = GridFunction(axes, np.zeros([a.count for a in axes]))
    return GridFunction(axes, spec.evaluate(g.points()))


def check_convex(grid, tol=None):
    """Discrete convexity along axis lines and diagonals.

    Returns ``(ok, max_violation)``; the violation is the magnitude of the most
    negative second difference (inf when the finite set is not convex).
    """
    v = grid.values
    finite = np.isfinite(v)
    if tol is None:
        tol = 1e-10 * (1.0 + (np.abs(v[finite]).max() if finite.any() else 0.0))
    n = grid.dim
    dirs = [tuple(int(i == d) for i in range(n)) for d in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            for s in (1, -1):
                d = [0] * n
                d[i], d[j] = 1, s
                dirs.append(tuple(d))
    worst = 0.0
    for d in dirs:
        sl_m, sl_0, sl_p = [], [], []
        for k in d:
            if k == 0:
                sl_m.append(slice(None)), sl_0.append(slice(None)), sl_p.append(slice(None))
            elif k == 1:
                sl_m.append(slice(0, -2)), sl_0.append(slice(1, -1)), sl_p.append(slice(2, None))
            else:
                sl_m.append(slice(2, None)), sl_0.append(slice(1, -1)), sl_p.append(slice(0, -2))
        a, b, c = v[tuple(sl_m)], v[tuple(sl_0)], v[tuple(sl_p)]
        ends = np.isfinite(a) & np.isfinite(c)
        if (ends & ~np.isfinite(b)).any():
            return False, math.inf
        with np.errstate(invalid="ignore"):
            second = np.where(ends, a + c - 2 * b, 0.0)
        worst = max(worst, float(-second.min()) if second.size else 0.0)
    return bool(worst <= tol), worst


def sphere_area(n):
    return 2 * math.pi ** (n / 2) / gamma(n / 2)


def direction_fan(n, count=None):
    """Deterministic near-uniform unit vectors."""
    if n == 1:
        return np.array([[1.0], [-1.0]])
    if n == 2:
        t = np.linspace(0, 2 * np.pi, count or 720, endpoint=False)
        return np.column_stack([np.cos(t), np.sin(t)])
    m = count or 2000
    k = np.arange(m) + 0.5
    z = 1 - 2 * k / m
    phi = k * math.pi * (3 - math.sqrt(5))
    r = np.sqrt(1 - z * z)
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def _radial_mass(spec, fan, n):
    # rough radial estimate of the total mass, used only to scale the tail tolerance
    total = 0.0
    for w in fan:
        r_hi = 1.0
        while r_hi < 1e6 and spec.evaluate(r_hi * w) < 40:
            r_hi *= 2
        r = np.linspace(0, r_hi, 400)
        f = spec.evaluate(r[:, None] * w[None, :])
        total += np.trapezoid(r ** (n - 1) * np.exp(-f), r)
    return total * sphere_area(n) / len(fan)


class GrowthError(ValueError):
    """The function is not coercive (no positive linear growth)."""


def circumradius(spec, n=None):
    n = spec.ndim(n)
    verts = _domain_vertices(spec, n)
    if verts is not None:
        return float(np.linalg.norm(verts, axis=1).max())
    fan = direction_fan(n, 360 if n == 2 else None)
    reach = []
    for w in fan:
        ray = spec.ray(w)
        if ray is None:
            return None
        reach.append(ray[1])
    return float(max(reach))


def truncation_radius(spec, tail_tol=1e-7, n=None):
    """Radius R with the mass of e^{-f} outside the R-ball below tail_tol * total mass.

    Uses the growth slope a(R) = min over a fan of f(R w)/R, which lower bounds
    f(x)/|x| beyond R by convexity, and the closed-form tail of e^{1 - a|x|}.
    """
    if not 0 < tail_tol < 1:
        raise ValueError("tail_tol must lie in (0, 1)")
    n = spec.ndim(n)
    if spec.bounded:
        r = circumradius(spec, n)
        if r is not None:
            return r
    fan = direction_fan(n, 720 if n == 2 else None)
    area = sphere_area(n)

    def slope(R):
        return float(np.min(spec.evaluate(R * fan))) / R

    def tail(R):
        a = slope(R)
        if not a > 0:
            return math.inf
        return math.e * area * gammaincc(n, a * R) * gamma(n) / a ** n

    mass = None
    R = 1.0
    while True:
        if slope(R) > 0:
            if mass is None:
                mass = _radial_mass(spec, fan[:: max(1, len(fan) // 90)], n)
            if tail(R) <= tail_tol * mass:
                break
        R *= 2
        if R > 1e8:
            raise GrowthError("estimated growth slope is not positive; integral diverges")
    lo, hi = R / 2, R
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if tail(mid) <= tail_tol * mass:
            hi = mid
        else:
            lo = mid
        if hi - lo < 1e-6 * hi:
            break
    return hi
