"""Pure-Python twins of the compiled line kernels (same algorithm, same output)."""
import math

TIE_RTOL = 1e-9


def _lower_hull(x, row, lo, hi):
    hull = []
    for k in range(lo, hi + 1):
        fk = row[k]
        if math.isinf(fk):
            continue
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            if (row[b] - row[a]) * (x[k] - x[b]) >= (fk - row[b]) * (x[b] - x[a]):
                hull.pop()
            else:
                break
        hull.append(k)
    return hull


def _finite_run(row):
    first = last = -1
    for k, v in enumerate(row):
        if not math.isinf(v):
            if first < 0:
                first = k
            last = k
    return first, last


def legendre_lines(x, f, y, out, arg):
    x = [float(v) for v in x]
    y = [float(v) for v in y]
    n = len(x)
    inf = math.inf
    for l in range(f.shape[0]):
        row = f[l].tolist()
        has_neg = any(v == -inf for v in row)
        first, last = _finite_run(row)
        if has_neg or first < 0:
            out[l, :] = inf if has_neg else -inf
            arg[l, :] = -1
            continue
        hull = _lower_hull(x, row, first, last)
        h = len(hull)
        p = 0
        for j, yy in enumerate(y):
            while p < h - 1 and (row[hull[p + 1]] - row[hull[p]]) <= yy * (x[hull[p + 1]] - x[hull[p]]):
                p += 1
            out[l, j] = x[hull[p]] * yy - row[hull[p]]
            q = hull[p]
            tol = TIE_RTOL * (1.0 + abs(yy))
            if q == n - 1 and p >= 1:
                s = (row[q] - row[hull[p - 1]]) / (x[q] - x[hull[p - 1]])
                if s >= yy - tol:
                    q = hull[p - 1]
            elif q == 0 and p < h - 1:
                s = (row[hull[p + 1]] - row[q]) / (x[hull[p + 1]] - x[q])
                if s <= yy + tol:
                    q = hull[p + 1]
            arg[l, j] = q


def lower_envelope_lines(x, f, out):
    x = [float(v) for v in x]
    for l in range(f.shape[0]):
        row = f[l].tolist()
        out[l, :] = math.inf
        first, last = _finite_run(row)
        if first < 0:
            continue
        hull = _lower_hull(x, row, first, last)
        p = 0
        for k in range(first, last + 1):
            while p < len(hull) - 1 and hull[p + 1] <= k:
                p += 1
            a = hull[p]
            if a == k or p == len(hull) - 1:
                out[l, k] = row[a]
            else:
                b = hull[p + 1]
                t = (x[k] - x[a]) / (x[b] - x[a])
                out[l, k] = (1.0 - t) * row[a] + t * row[b]
