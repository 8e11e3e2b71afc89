# cython: language_level=3
"""Compiled line kernels for the discrete Legendre transform.

Every routine works on a batch of lines sharing one uniform abscissa ``x``.
Values may contain ``+inf`` (outside the domain); ``-inf`` marks a line on
which the previous transform pass was already unbounded.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, fabs, isinf

cnp.import_array()

cdef double TIE_RTOL = 1e-9


cdef Py_ssize_t _lower_hull(const double[:] x, const double[:] f,
                            Py_ssize_t lo, Py_ssize_t hi,
                            Py_ssize_t[:] hull) noexcept nogil:
    # Monotone chain over finite nodes lo..hi; collinear points are dropped.
    cdef Py_ssize_t h = 0, k, a, b
    for k in range(lo, hi + 1):
        if isinf(f[k]):
            continue
        while h >= 2:
            a = hull[h - 2]
            b = hull[h - 1]
            if (f[b] - f[a]) * (x[k] - x[b]) >= (f[k] - f[b]) * (x[b] - x[a]):
                h -= 1
            else:
                break
        hull[h] = k
        h += 1
    return h


def legendre_lines(const double[:] x, const double[:, :] f, const double[:] y,
                   double[:, :] out, Py_ssize_t[:, :] arg):
    """Discrete conjugate ``out[l, j] = max_k x[k]*y[j] - f[l, k]`` per line.

    ``arg`` receives a maximising node; among tied hull vertices an interior
    one is preferred over a box end. It is -1 on lines without a maximiser.
    """
    cdef Py_ssize_t L = f.shape[0], N = f.shape[1], M = y.shape[0]
    cdef Py_ssize_t l, k, j, h, p, q, first, last
    cdef bint has_neg
    cdef double s, yy, tol
    cdef Py_ssize_t[:] hull = np.empty(N, dtype=np.intp)
    with nogil:
        for l in range(L):
            first = -1
            last = -1
            has_neg = False
            for k in range(N):
                if f[l, k] == -INFINITY:
                    has_neg = True
                elif f[l, k] != INFINITY:
                    if first < 0:
                        first = k
                    last = k
            if has_neg or first < 0:
                for j in range(M):
                    out[l, j] = INFINITY if has_neg else -INFINITY
                    arg[l, j] = -1
                continue
            h = _lower_hull(x, f[l], first, last, hull)
            p = 0
            for j in range(M):
                yy = y[j]
                while p < h - 1 and (f[l, hull[p + 1]] - f[l, hull[p]]) <= yy * (x[hull[p + 1]] - x[hull[p]]):
                    p += 1
                out[l, j] = x[hull[p]] * yy - f[l, hull[p]]
                q = hull[p]
                tol = TIE_RTOL * (1.0 + fabs(yy))
                if q == N - 1 and p >= 1:
                    s = (f[l, q] - f[l, hull[p - 1]]) / (x[q] - x[hull[p - 1]])
                    if s >= yy - tol:
                        q = hull[p - 1]
                elif q == 0 and p < h - 1:
                    s = (f[l, hull[p + 1]] - f[l, q]) / (x[hull[p + 1]] - x[q])
                    if s <= yy + tol:
                        q = hull[p + 1]
                arg[l, j] = q


def lower_envelope_lines(const double[:] x, const double[:, :] f, double[:, :] out):
    """Greatest convex minorant of each line, evaluated at every node.

    Nodes outside the finite run stay +inf; the minorant interpolates the
    lower hull of the finite samples.
    """
    cdef Py_ssize_t L = f.shape[0], N = f.shape[1]
    cdef Py_ssize_t l, k, h, p, first, last, a, b
    cdef double t
    cdef Py_ssize_t[:] hull = np.empty(N, dtype=np.intp)
    with nogil:
        for l in range(L):
            first = -1
            last = -1
            for k in range(N):
                if not isinf(f[l, k]):
                    if first < 0:
                        first = k
                    last = k
            for k in range(N):
                out[l, k] = INFINITY
            if first < 0:
                continue
            h = _lower_hull(x, f[l], first, last, hull)
            p = 0
            for k in range(first, last + 1):
                while p < h - 1 and hull[p + 1] <= k:
                    p += 1
                a = hull[p]
                if a == k or p == h - 1:
                    out[l, k] = f[l, a]
                else:
                    b = hull[p + 1]
                    t = (x[k] - x[a]) / (x[b] - x[a])
                    out[l, k] = (1.0 - t) * f[l, a] + t * f[l, b]
