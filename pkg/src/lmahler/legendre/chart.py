"""Gradient image of a coordinate hyperplane.

For smooth strictly convex f and an axis i, grad f maps e_i^perp onto the
graph {y + t_i(y) e_i} over the range of the section's gradient. The chart
stores t_i at sample points y and certifies Lf(y + t_i(y) e_i) = L(f_i)(y).
"""
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

MAX_ITER = 200
ARG_TOL = 1e-10


class ChartError(RuntimeError):
    pass


def _embed(z, axis):
    return np.insert(np.atleast_2d(z), axis, 0.0, axis=-1)


def conjugate_value(spec, y, n=None):
    """sup_x <x, y> - f(x) for a smooth spec, by convex minimisation.

    Uses the closed form when the spec knows its conjugate.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    dual = spec.conjugate()
    if dual is not None:
        return float(dual.evaluate(y))

    def obj(x):
        return float(spec.evaluate(x)) - x @ y

    def jac(x):
        return np.asarray(spec.grad(x), dtype=float).reshape(-1) - y

    res = minimize(obj, np.zeros(len(y)), jac=jac, method="BFGS", options={"gtol": 1e-11, "maxiter": 500})
    return -float(res.fun)


def _section_grad(spec, z, axis):
    return np.delete(np.asarray(spec.grad(_embed(z, axis)), dtype=float), axis, axis=-1)


def solve_section_gradient(spec, y, axis):
    """Points z in e_axis^perp with grad f_axis(z) = y, one per row of y."""
    y = np.atleast_2d(np.asarray(y, dtype=float))
    if y.shape[1] == 1:
        return _bisect_1d(spec, y[:, 0], axis)[:, None]
    out = np.empty_like(y)
    for k, target in enumerate(y):
        def obj(z, target=target):
            return float(spec.evaluate(_embed(z, axis))[0]) - z @ target

        def jac(z, target=target):
            return _section_grad(spec, z, axis)[0] - target

        res = minimize(obj, np.zeros(len(target)), jac=jac, method="BFGS",
                       options={"gtol": 1e-11, "maxiter": MAX_ITER})
        if np.max(np.abs(jac(res.x))) > 1e-7:
            raise ChartError(f"gradient inversion failed at y={target.tolist()}")
        out[k] = res.x
    return out


def _bisect_1d(spec, y, axis):
    # the section derivative is nondecreasing, so bracket by doubling and bisect
    def d(z):
        return _section_grad(spec, z[:, None], axis)[:, 0]

    lo = -np.ones_like(y)
    hi = np.ones_like(y)
    for _ in range(MAX_ITER):
        bad_lo, bad_hi = d(lo) > y, d(hi) < y
        if not (bad_lo.any() or bad_hi.any()):
            break
        lo = np.where(bad_lo, 2 * lo, lo)
        hi = np.where(bad_hi, 2 * hi, hi)
    else:
        raise ChartError("section gradient does not reach the requested values")
    for _ in range(MAX_ITER):
        mid = 0.5 * (lo + hi)
        up = d(mid) >= y
        hi = np.where(up, mid, hi)
        lo = np.where(up, lo, mid)
        if np.max(hi - lo) <= ARG_TOL * np.maximum(1.0, np.abs(mid)).max():
            break
    else:
        raise ChartError("bisection did not converge")
    return 0.5 * (lo + hi)


@dataclass
class GradientChart:
    axis: int
    samples: np.ndarray     # y_j in e_axis^perp (coordinates without the axis)
    t: np.ndarray           # t_axis(y_j)
    inverse: np.ndarray     # z_j with grad f_axis(z_j) = y_j
    residual: float         # max |Lf(y + t e_axis) - L(f_axis)(y)|

    def lifted(self):
        """Points y + t(y) e_axis of the gradient image."""
        return np.insert(self.samples, self.axis, self.t, axis=-1)


def gradient_chart(spec, axis, samples, n=None, certify=True):
    """Chart of grad f(e_axis^perp) over the given section-gradient values."""
    n = spec.ndim(n)
    y = np.atleast_2d(np.asarray(samples, dtype=float))
    if y.shape[1] != n - 1:
        y = y.reshape(-1, n - 1)
    z = solve_section_gradient(spec, y, axis)
    g = np.asarray(spec.grad(_embed(z, axis)), dtype=float)
    t = g[:, axis]
    residual = 0.0
    if certify:
        sec = spec if spec.dim is None else spec.section(axis)
        for yk, tk in zip(y, t):
            lf = conjugate_value(spec, np.insert(yk, axis, tk))
            residual = max(residual, abs(lf - conjugate_value(sec, yk)))
    return GradientChart(axis, y, t, z, residual)
