"""Linear maps and cones with apex at the origin."""
from dataclasses import dataclass, field
from itertools import product

import numpy as np


class LinearMap:
    """Invertible n x n matrix with cached determinant and inverse."""

    def __init__(self, entries):
        a = np.array(entries, dtype=float)
        if a.ndim == 0:
            a = a.reshape(1, 1)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] not in (1, 2, 3):
            raise ValueError(f"expected a square 1x1..3x3 matrix, got shape {a.shape}")
        det = float(np.linalg.det(a))
        if not np.isfinite(det) or abs(det) <= 1e-14 * max(1.0, np.abs(a).max()) ** a.shape[0]:
            raise ValueError("linear map is singular")
        self.entries = a
        self.entries.setflags(write=False)
        self.det = det
        self.inverse = np.linalg.inv(a)
        self.inverse.setflags(write=False)

    @property
    def dim(self):
        return self.entries.shape[0]

    @classmethod
    def identity(cls, n):
        return cls(np.eye(n))

    @classmethod
    def rotation(cls, angle):
        c, s = np.cos(angle), np.sin(angle)
        return cls([[c, -s], [s, c]])

    @classmethod
    def from_columns(cls, *cols):
        return cls(np.column_stack(cols))

    def __call__(self, x):
        return np.asarray(x, dtype=float) @ self.entries.T

    def __matmul__(self, other):
        return LinearMap(self.entries @ other.entries)

    def inv(self):
        return LinearMap(self.inverse)

    def adjoint_inverse(self):
        """(T^{-1})^*, the map carrying Lf to L(f o T)."""
        return LinearMap(self.inverse.T)

    def column_norm(self):
        """Operator norm from l1 to l2, i.e. the largest column length."""
        return float(np.max(np.linalg.norm(self.entries, axis=0)))

    def __repr__(self):
        return f"LinearMap({self.entries.tolist()!r})"


def sign_patterns(n):
    """All sign vectors in {-1, 1}^n, in lexicographic order starting from all +1."""
    return [tuple(s) for s in product((1, -1), repeat=n)]


@dataclass(frozen=True)
class ConeRegion:
    """Closed cone with apex 0.

    Either an orthant ``{x : signs[i] * x[i] >= 0}`` or, in the plane, the
    cone ``R+ u + R+ v`` with ``v`` strictly counterclockwise of ``u`` by less
    than a half turn. ``signs=None`` and ``gens=None`` means the whole space.
    """

    dim: int
    signs: tuple = None
    gens: tuple = field(default=None)

    def __post_init__(self):
        if self.signs is not None:
            s = tuple(int(v) for v in self.signs)
            if len(s) != self.dim or any(v not in (-1, 1) for v in s):
                raise ValueError(f"bad sign pattern {self.signs!r} for dim {self.dim}")
            object.__setattr__(self, "signs", s)
        if self.gens is not None:
            if self.dim != 2:
                raise ValueError("generator cones are planar")
            u, v = (np.asarray(g, dtype=float) for g in self.gens)
            u = u / np.linalg.norm(u)
            v = v / np.linalg.norm(v)
            if u[0] * v[1] - u[1] * v[0] <= 0:
                raise ValueError("v must lie in the open half-circle counterclockwise of u")
            object.__setattr__(self, "gens", (tuple(u), tuple(v)))

    @classmethod
    def orthant(cls, signs):
        return cls(len(signs), signs=tuple(signs))

    @classmethod
    def between(cls, u, v):
        return cls(2, gens=(tuple(u), tuple(v)))

    @classmethod
    def whole(cls, n):
        return cls(n)

    @property
    def is_whole(self):
        return self.signs is None and self.gens is None

    def halfplanes(self):
        """Inward normals ``a`` with the cone equal to ``{x : <a, x> >= 0}``."""
        if self.signs is not None:
            return [s * np.eye(self.dim)[i] for i, s in enumerate(self.signs)]
        if self.gens is not None:
            u, v = (np.array(g) for g in self.gens)
            # det(u, x) >= 0 and det(x, v) >= 0
            return [np.array([-u[1], u[0]]), np.array([v[1], -v[0]])]
        return []

    def contains(self, x, tol=0.0):
        x = np.asarray(x, dtype=float)
        ok = np.ones(x.shape[:-1], dtype=bool)
        for a in self.halfplanes():
            ok &= x @ a >= -tol
        return ok

    def boundary_axes(self):
        """For an orthant, (axis, outward normal) pairs of its facets."""
        if self.signs is None:
            raise ValueError("only orthants have axis facets")
        return [(i, -s * np.eye(self.dim)[i]) for i, s in enumerate(self.signs)]
