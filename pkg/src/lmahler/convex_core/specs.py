"""Catalog of even convex functions with exact evaluation.

Every spec evaluates vectorised over the last axis of its input. Polyhedral
planar specs also expose their affine pieces, which the exact integration
engine consumes, and specs that are linear along rays expose ``ray``.
"""
import json
import math
import re
from itertools import product

import numpy as np

from .geometry import LinearMap

BOUNDARY_RTOL = 1e-12
INF = math.inf


class SpecError(ValueError):
    """Malformed or unsupported spec."""


def _as_points(x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    return x


def _ccw(poly):
    poly = np.asarray(poly, dtype=float)
    area = 0.5 * np.sum(poly[:, 0] * np.roll(poly[:, 1], -1) - np.roll(poly[:, 0], -1) * poly[:, 1])
    return poly if area >= 0 else poly[::-1].copy()


def _fmt(v):
    if isinstance(v, np.ndarray):
        v = v.tolist()
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return json.dumps(v, separators=(",", ":"))
    return str(v)


class FunctionSpec:
    """Base class. Subclasses set ``kind`` and implement ``_eval``."""

    kind = "abstract"
    dim = None          # None means "any dimension"
    indicator = False   # values are 0 / +inf only
    bounded = False     # bounded domain
    smooth = False      # differentiable everywhere on its domain

    def __call__(self, x):
        return self.evaluate(x)

    def evaluate(self, x):
        x = _as_points(x)
        if self.dim is not None and x.shape[-1] != self.dim:
            raise SpecError(f"{self.kind} is {self.dim}-dimensional, got points of size {x.shape[-1]}")
        out = np.asarray(self._eval(x), dtype=float)
        return float(out) if out.ndim == 0 else out

    def _eval(self, x):
        raise NotImplementedError

    def params(self):
        return {}

    def text(self):
        parts = [self.kind] + [f"{k}={_fmt(v)}" for k, v in self.params().items()]
        return " ".join(parts)

    def __repr__(self):
        return f"<{self.text()}>"

    def __eq__(self, other):
        return isinstance(other, FunctionSpec) and self.text() == other.text()

    def __hash__(self):
        return hash(self.text())

    def ndim(self, n=None):
        if self.dim is not None:
            if n is not None and n != self.dim:
                raise SpecError(f"{self.kind} is {self.dim}-dimensional, not {n}")
            return self.dim
        if n is None:
            raise SpecError(f"{self.kind} needs an explicit dimension")
        return int(n)

    # optional structure, None when unknown
    def conjugate(self):
        return None

    def pieces(self, L):
        """Affine pieces ``(ccw polygon, gradient, offset)`` covering dom ∩ [-L, L]^2."""
        return None

    @property
    def polyhedral(self):
        return False

    def ray(self, u):
        """``(slope, reach)`` with f(r u) = slope * r for 0 <= r <= reach, +inf beyond."""
        return None

    def vertices(self):
        return None

    def ray_breaks(self, dirs):
        """Radii where r -> f(r v) may fail to be smooth, one row per direction v; None if unknown."""
        return None

    def grad(self, x):
        """Gradient; central differences unless overridden."""
        x = np.array(_as_points(x), dtype=float)
        g = np.empty_like(x)
        h = 1e-6 * np.maximum(1.0, np.abs(x).max(axis=-1, keepdims=True))
        for i in range(x.shape[-1]):
            e = np.zeros(x.shape[-1])
            e[i] = 1.0
            fp = self._eval(x + h * e)
            fm = self._eval(x - h * e)
            g[..., i] = (fp - fm) / (2 * h[..., 0])
        return g

    def section(self, axis):
        return Section(self, axis)

    def compose(self, T):
        return compose_linear(self, T)


class Gaussian(FunctionSpec):
    kind = "gaussian"
    smooth = True

    def __init__(self, scale=1.0):
        if scale <= 0:
            raise SpecError("scale must be positive")
        self.scale = float(scale)

    def _eval(self, x):
        return np.sum(x * x, axis=-1) / (2 * self.scale ** 2)

    def grad(self, x):
        return _as_points(x) / self.scale ** 2

    def params(self):
        return {"scale": self.scale}

    def conjugate(self):
        return Gaussian(1.0 / self.scale)

    def section(self, axis):
        return self


class PNorm(FunctionSpec):
    """Sum of |x_i / scale|^p / p; the l1 norm at p = 1."""

    kind = "pnorm"

    def __init__(self, p=2.0, scale=1.0):
        if p < 1:
            raise SpecError("p must be >= 1")
        if scale <= 0:
            raise SpecError("scale must be positive")
        self.p = float(p)
        self.scale = float(scale)
        self.smooth = self.p > 1

    def _eval(self, x):
        return np.sum(np.abs(x / self.scale) ** self.p, axis=-1) / self.p

    def grad(self, x):
        z = _as_points(x) / self.scale
        return np.sign(z) * np.abs(z) ** (self.p - 1) / self.scale

    def params(self):
        return {"p": self.p, "scale": self.scale}

    def conjugate(self):
        if self.p == 1:
            return CubeIndicator(1.0 / self.scale)
        return PNorm(self.p / (self.p - 1), 1.0 / self.scale)

    @property
    def polyhedral(self):
        return self.p == 1

    def pieces(self, L):
        if self.p != 1:
            return None
        s = self.scale
        return ParallelogramNorm([s, 0], [0, s]).pieces(L)

    def ray(self, u):
        if self.p != 1:
            return None
        return float(np.sum(np.abs(u))) / self.scale, INF

    def section(self, axis):
        return self


class CubeIndicator(FunctionSpec):
    """Indicator of the cube [-r, r]^n."""

    kind = "cube_indicator"
    indicator = True
    bounded = True

    def __init__(self, r=1.0):
        if r <= 0:
            raise SpecError("r must be positive")
        self.r = float(r)

    def _eval(self, x):
        inside = np.max(np.abs(x), axis=-1) <= self.r * (1 + BOUNDARY_RTOL)
        return np.where(inside, 0.0, INF)

    def params(self):
        return {"r": self.r}

    def conjugate(self):
        return PNorm(1.0, 1.0 / self.r)

    @property
    def polyhedral(self):
        return True

    def pieces(self, L):
        r = self.r
        return ParallelogramIndicator([r, r], [-r, r]).pieces(L)

    def ray(self, u):
        return 0.0, self.r / float(np.max(np.abs(u)))

    def vertices(self, n=2):
        return self.r * np.array(list(product((1, -1), repeat=n)), dtype=float)

    def section(self, axis):
        return self


def _dual_pair_vectors(a1, a2):
    """Columns X^{-T}(1, 1), X^{-T}(-1, 1) for X = [a1 a2]."""
    X = np.column_stack([a1, a2]).astype(float)
    Xit = np.linalg.inv(X).T
    return Xit @ [1.0, 1.0], Xit @ [-1.0, 1.0]


class ParallelogramIndicator(FunctionSpec):
    """Indicator of conv(±u1, ±u2)."""

    kind = "parallelogram_indicator"
    dim = 2
    indicator = True
    bounded = True

    def __init__(self, u1=(1.0, 0.0), u2=(0.0, 1.0)):
        self.u1 = np.array(u1, dtype=float)
        self.u2 = np.array(u2, dtype=float)
        U = np.column_stack([self.u1, self.u2])
        if abs(np.linalg.det(U)) < 1e-14:
            raise SpecError("u1, u2 must be linearly independent")
        self._Uinv = np.linalg.inv(U)

    def _eval(self, x):
        c = x @ self._Uinv.T
        inside = np.sum(np.abs(c), axis=-1) <= 1 + BOUNDARY_RTOL
        return np.where(inside, 0.0, INF)

    def params(self):
        return {"u1": self.u1.tolist(), "u2": self.u2.tolist()}

    def conjugate(self):
        return ParallelogramNorm(*_dual_pair_vectors(self.u1, self.u2))

    @property
    def polyhedral(self):
        return True

    def pieces(self, L):
        poly = _ccw([self.u1, self.u2, -self.u1, -self.u2])
        return [(poly, np.zeros(2), 0.0)]

    def ray(self, u):
        return 0.0, 1.0 / float(np.sum(np.abs(self._Uinv @ u)))

    def vertices(self):
        return np.array([self.u1, self.u2, -self.u1, -self.u2])

    def area(self):
        return 2.0 * abs(np.linalg.det(np.column_stack([self.u1, self.u2])))


class ParallelogramNorm(FunctionSpec):
    """Gauge of conv(±w1, ±w2)."""

    kind = "parallelogram_norm"
    dim = 2

    def __init__(self, w1=(1.0, 0.0), w2=(0.0, 1.0)):
        self.w1 = np.array(w1, dtype=float)
        self.w2 = np.array(w2, dtype=float)
        W = np.column_stack([self.w1, self.w2])
        if abs(np.linalg.det(W)) < 1e-14:
            raise SpecError("w1, w2 must be linearly independent")
        self._Winv = np.linalg.inv(W)

    def _eval(self, x):
        return np.sum(np.abs(x @ self._Winv.T), axis=-1)

    def params(self):
        return {"w1": self.w1.tolist(), "w2": self.w2.tolist()}

    def conjugate(self):
        return ParallelogramIndicator(*_dual_pair_vectors(self.w1, self.w2))

    @property
    def polyhedral(self):
        return True

    def pieces(self, L):
        lam = 2 * math.sqrt(2) * L * np.linalg.norm(self._Winv, 2) + 1.0
        out = []
        for s1, s2 in product((1, -1), repeat=2):
            a, b = s1 * self.w1, s2 * self.w2
            poly = _ccw([[0.0, 0.0], lam * a, lam * (a + b), lam * b])
            out.append((poly, self._Winv.T @ [s1, s2], 0.0))
        return out

    def ray(self, u):
        return float(np.sum(np.abs(self._Winv @ u))), INF


class Mixed(FunctionSpec):
    """c|x'_1| + I_{[-b, b]}(x'_2) in coordinates x = basis @ x'."""

    kind = "mixed"
    dim = 2

    def __init__(self, c=1.0, b=1.0, basis=((1.0, 0.0), (0.0, 1.0))):
        if c <= 0 or b <= 0:
            raise SpecError("c and b must be positive")
        self.c = float(c)
        self.b = float(b)
        self.basis = np.array(basis, dtype=float)
        if self.basis.shape != (2, 2) or abs(np.linalg.det(self.basis)) < 1e-14:
            raise SpecError("basis must be an invertible 2x2 matrix")
        self._Binv = np.linalg.inv(self.basis)

    def _eval(self, x):
        z = x @ self._Binv.T
        inside = np.abs(z[..., 1]) <= self.b * (1 + BOUNDARY_RTOL)
        return np.where(inside, self.c * np.abs(z[..., 0]), INF)

    def params(self):
        return {"c": self.c, "b": self.b, "basis": self.basis.tolist()}

    def conjugate(self):
        swapped = np.linalg.inv(self.basis).T[:, ::-1]
        return Mixed(self.b, self.c, swapped)

    @property
    def polyhedral(self):
        return True

    def pieces(self, L):
        lam = 2 * math.sqrt(2) * L * np.linalg.norm(self._Binv, 2) + 1.0
        out = []
        for s in (1, -1):
            local = np.array([[0, -self.b], [s * lam, -self.b], [s * lam, self.b], [0, self.b]], dtype=float)
            poly = _ccw(local @ self.basis.T)
            out.append((poly, self.c * s * self._Binv[0], 0.0))
        return out

    def ray(self, u):
        z = self._Binv @ u
        reach = INF if z[1] == 0 else self.b / abs(z[1])
        return self.c * abs(z[0]), reach

    def split(self, x):
        """Decompose x = x1 + x2 along the two basis lines."""
        z = _as_points(x) @ self._Binv.T
        return z[..., :1] * self.basis[:, 0], z[..., 1:] * self.basis[:, 1]


class MaxAffine(FunctionSpec):
    """max(0, max_j |<a_j, x>| - b_j) + quad_eps |x|^2 / 2 with seeded a_j, b_j.

    a_j are standard normal, b_j uniform on [0, 1]. With ``unconditional`` the
    family is closed under coordinate sign flips.
    """

    kind = "max_affine"

    def __init__(self, seed=0, k=5, quad_eps=0.0, n=2, unconditional=False):
        if k < 1:
            raise SpecError("k must be >= 1")
        if quad_eps < 0:
            raise SpecError("quad_eps must be >= 0")
        self.seed, self.k, self.quad_eps = int(seed), int(k), float(quad_eps)
        self.dim = int(n)
        self.unconditional = bool(unconditional)
        rng = np.random.default_rng(self.seed)
        a = rng.standard_normal((self.k, self.dim))
        b = rng.uniform(0.0, 1.0, self.k)
        if self.unconditional:
            flips = np.array(list(product((1, -1), repeat=self.dim)), dtype=float)
            a = (a[:, None, :] * flips[None, :, :]).reshape(-1, self.dim)
            b = np.repeat(b, len(flips))
        self.a, self.b = a, b

    def _eval(self, x):
        lin = np.abs(x @ self.a.T) - self.b
        out = np.maximum(0.0, lin.max(axis=-1))
        if self.quad_eps:
            out = out + self.quad_eps * np.sum(x * x, axis=-1) / 2
        return out

    def params(self):
        p = {"seed": self.seed, "k": self.k, "quad_eps": self.quad_eps, "n": self.dim}
        if self.unconditional:
            p["unconditional"] = True
        return p

    def affine_family(self):
        """Gradients and offsets of the affine functions whose maximum is f (no quadratic term)."""
        g = np.vstack([np.zeros(self.dim), self.a, -self.a])
        c = np.concatenate([[0.0], -self.b, -self.b])
        return g, c

    @property
    def polyhedral(self):
        return self.quad_eps == 0 and self.dim == 2

    def pieces(self, L):
        if not self.polyhedral:
            return None
        g, c = self.affine_family()
        box = np.array([[-L, -L], [L, -L], [L, L], [-L, L]], dtype=float)
        return _max_affine_pieces(g, c, box)

    def ray(self, u):
        if self.quad_eps:
            return None
        # f(r u) = max(0, max_j r|<a_j,u>| - b_j) is not linear in r unless b vanishes
        return None

    def ray_breaks(self, dirs):
        with np.errstate(divide="ignore"):
            return self.b / np.abs(np.asarray(dirs, dtype=float) @ self.a.T)

    def conjugate(self):
        if self.quad_eps:
            return None
        g, c = self.affine_family()
        return LiftedHull(g, -c)


def _max_affine_pieces(g, c, box):
    from ..measures.polyhedral import clip_halfplane

    out = []
    for i in range(len(g)):
        poly = box
        for m in range(len(g)):
            if m != i:
                poly = clip_halfplane(poly, g[i] - g[m], c[m] - c[i])
                if len(poly) < 3:
                    break
        if len(poly) >= 3:
            out.append((_ccw(poly), g[i].copy(), float(c[i])))
    return out


class LiftedHull(FunctionSpec):
    """Lower convex envelope of the lifted points (p_i, h_i); +inf off conv(p_i).

    It is the conjugate of max_i <p_i, x> - h_i.
    """

    kind = "lifted_hull"

    def __init__(self, points, heights):
        from scipy.spatial import ConvexHull

        self.points = np.array(points, dtype=float)
        self.heights = np.array(heights, dtype=float)
        self.dim = self.points.shape[1]
        lifted = np.column_stack([self.points, self.heights])
        hull = ConvexHull(lifted)
        lower = hull.equations[:, self.dim] < -1e-12
        eq = hull.equations[lower]
        # facet: <n, p> + n_h h + off = 0  =>  h = -(<n, p> + off) / n_h
        self._grad = -eq[:, :self.dim] / eq[:, self.dim:self.dim + 1]
        self._off = -eq[:, -1] / eq[:, self.dim]
        self._facets = hull.simplices[lower]
        base = ConvexHull(self.points)
        self._dom = base.equations
        self.bounded = True

    def _eval(self, x):
        vals = x @ self._grad.T + self._off
        out = vals.max(axis=-1)
        scale = 1.0 + np.abs(self.points).max()
        outside = (x @ self._dom[:, :-1].T + self._dom[:, -1]).max(axis=-1) > BOUNDARY_RTOL * scale
        return np.where(outside, INF, out)

    def params(self):
        return {"points": self.points.tolist(), "heights": self.heights.tolist()}

    @property
    def polyhedral(self):
        return self.dim == 2

    def pieces(self, L):
        out = []
        for simplex, g, c in zip(self._facets, self._grad, self._off):
            out.append((_ccw(self.points[simplex]), g.copy(), float(c)))
        return out

    def vertices(self):
        return self.points

    def conjugate(self):
        return None


class Quadratic(FunctionSpec):
    """<Ax, x>/2 for symmetric positive definite A."""

    kind = "quadratic"
    smooth = True

    def __init__(self, A):
        self.A = np.array(A, dtype=float)
        if self.A.ndim != 2 or self.A.shape[0] != self.A.shape[1]:
            raise SpecError("A must be square")
        if not np.allclose(self.A, self.A.T) or np.linalg.eigvalsh(self.A).min() <= 0:
            raise SpecError("A must be symmetric positive definite")
        self.dim = self.A.shape[0]

    def _eval(self, x):
        return 0.5 * np.einsum("...i,ij,...j->...", x, self.A, x)

    def grad(self, x):
        return _as_points(x) @ self.A.T

    def params(self):
        return {"A": self.A.tolist()}

    def conjugate(self):
        return Quadratic(np.linalg.inv(self.A))


class Composed(FunctionSpec):
    """x -> inner(T x)."""

    kind = "composed"

    def __init__(self, inner, T):
        self.inner = inner
        self.T = T if isinstance(T, LinearMap) else LinearMap(T)
        if inner.dim is not None and inner.dim != self.T.dim:
            raise SpecError("map and spec dimensions differ")
        self.dim = self.T.dim
        self.indicator = inner.indicator
        self.bounded = inner.bounded
        self.smooth = inner.smooth

    def _eval(self, x):
        return self.inner._eval(x @ self.T.entries.T)

    def grad(self, x):
        return self.inner.grad(_as_points(x) @ self.T.entries.T) @ self.T.entries

    def text(self):
        return f"{self.inner.text()} linear={_fmt(self.T.entries.tolist())}"

    def conjugate(self):
        c = self.inner.conjugate()
        return None if c is None else Composed(c, self.T.adjoint_inverse())

    @property
    def polyhedral(self):
        return self.inner.polyhedral

    def pieces(self, L):
        Lin = math.sqrt(2) * L * np.linalg.norm(self.T.entries, 2) + 1.0
        inner = self.inner.pieces(Lin)
        if inner is None:
            return None
        Tinv = self.T.inverse
        return [(_ccw(poly @ Tinv.T), self.T.entries.T @ g, c) for poly, g, c in inner]

    def ray(self, u):
        return self.inner.ray(self.T.entries @ np.asarray(u, dtype=float))

    def ray_breaks(self, dirs):
        return self.inner.ray_breaks(np.asarray(dirs, dtype=float) @ self.T.entries.T)

    def vertices(self):
        v = self.inner.vertices() if not isinstance(self.inner, CubeIndicator) else self.inner.vertices(self.dim)
        return None if v is None else v @ self.T.inverse.T


class Section(FunctionSpec):
    """Restriction to the hyperplane x[axis] = 0, in the remaining coordinates."""

    kind = "section"

    def __init__(self, inner, axis):
        if inner.dim is None:
            raise SpecError("dimension-free specs are their own sections")
        if not 0 <= axis < inner.dim or inner.dim < 2:
            raise SpecError("bad section axis")
        self.inner, self.axis = inner, int(axis)
        self.dim = inner.dim - 1
        self.indicator = inner.indicator
        self.smooth = inner.smooth

    def embed(self, x):
        x = _as_points(x)
        return np.insert(x, self.axis, 0.0, axis=-1)

    def _eval(self, x):
        return self.inner._eval(self.embed(x))

    def text(self):
        return f"section axis={self.axis} of ({self.inner.text()})"

    def ray(self, u):
        return self.inner.ray(self.embed(np.asarray(u, dtype=float)))

    def ray_breaks(self, dirs):
        return self.inner.ray_breaks(self.embed(dirs))


class Shifted(FunctionSpec):
    """inner - inner(0), restoring the normalisation f(0) = 0."""

    kind = "shifted"

    def __init__(self, inner, n=None):
        self.inner = inner
        self.dim = inner.dim
        self.offset = float(inner.evaluate(np.zeros(inner.ndim(n))))
        self.smooth = inner.smooth
        self.indicator = inner.indicator

    def _eval(self, x):
        return self.inner._eval(x) - self.offset

    def grad(self, x):
        return self.inner.grad(x)

    def ray(self, u):
        prof = self.inner.ray(u)
        return prof if self.offset == 0 else None

    def ray_breaks(self, dirs):
        return self.inner.ray_breaks(dirs)

    @property
    def polyhedral(self):
        return self.inner.polyhedral

    def pieces(self, L):
        inner = self.inner.pieces(L)
        return None if inner is None else [(p, g, c - self.offset) for p, g, c in inner]

    def text(self):
        return f"shifted ({self.inner.text()})"


class GridSpec(FunctionSpec):
    """Multilinear interpolation of a GridFunction; +inf outside its finite cells."""

    kind = "grid"

    def __init__(self, grid, path=None):
        self.grid = grid
        self.dim = grid.dim
        self.path = path

    def _eval(self, x):
        return self.grid.interpolate(x)

    def params(self):
        return {"path": self.path} if self.path else {}


KINDS = {
    "gaussian": Gaussian,
    "pnorm": PNorm,
    "cube_indicator": CubeIndicator,
    "parallelogram_norm": ParallelogramNorm,
    "parallelogram_indicator": ParallelogramIndicator,
    "mixed": Mixed,
    "max_affine": MaxAffine,
    "quadratic": Quadratic,
}


def compose_linear(spec, T):
    """Spec evaluating x -> spec(T x)."""
    T = T if isinstance(T, LinearMap) else LinearMap(T)
    if isinstance(spec, Composed):
        return Composed(spec.inner, LinearMap(spec.T.entries @ T.entries))
    return Composed(spec, T)


def evaluate(spec, x):
    return spec.evaluate(x)


def _split_tokens(text):
    tokens, depth, cur = [], 0, []
    for ch in text.strip():
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
        if ch.isspace() and depth == 0:
            if cur:
                tokens.append("".join(cur))
                cur = []
        else:
            cur.append(ch)
    if depth != 0:
        raise SpecError(f"unbalanced brackets in {text!r}")
    if cur:
        tokens.append("".join(cur))
    return tokens


def _parse_value(raw):
    low = raw.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def parse_spec(text, n=None):
    """Parse the canonical text form, e.g. ``mixed c=0.5 b=2 basis=[[1,0],[0,1]]``.

    A trailing ``linear=[[...]]`` composes the spec with that matrix. ``n``
    fixes the dimension of ``max_affine`` and is checked against others.
    """
    tokens = _split_tokens(text)
    if not tokens:
        raise SpecError("empty spec")
    kind, params = tokens[0], {}
    for tok in tokens[1:]:
        m = re.fullmatch(r"([A-Za-z_]\w*)=(.+)", tok)
        if not m:
            raise SpecError(f"expected key=value, got {tok!r}")
        params[m.group(1)] = _parse_value(m.group(2))
    linear = params.pop("linear", None)
    if kind == "grid":
        from .grid import load_grid

        path = params.pop("path", None)
        if path is None or params:
            raise SpecError("grid spec takes exactly one parameter: path")
        spec = GridSpec(load_grid(path), path=path)
    elif kind in KINDS:
        cls = KINDS[kind]
        if cls is MaxAffine and n is not None:
            params.setdefault("n", n)
        try:
            spec = cls(**params)
        except SpecError:
            raise
        except (TypeError, ValueError) as exc:
            raise SpecError(f"bad parameters for {kind}: {exc}") from None
    else:
        raise SpecError(f"unknown spec kind {kind!r}")
    if linear is not None:
        try:
            spec = compose_linear(spec, LinearMap(linear))
        except ValueError as exc:
            raise SpecError(str(exc)) from None
    if n is not None:
        spec.ndim(n)
    return spec
