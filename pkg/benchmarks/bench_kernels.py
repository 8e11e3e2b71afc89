"""Compiled vs pure-Python line kernels.

Usage: python3 benchmarks/bench_kernels.py [--lines L] [--nodes N] [--repeat R]

Times ``legendre_lines`` and ``lower_envelope_lines`` on both backends over
identical random convex rows and checks that the outputs agree bit for bit.
"""
import argparse
import time

import numpy as np

from lmahler.legendre import kernels


def _rows(lines, nodes, seed=0):
    rng = np.random.default_rng(seed)
    x = np.linspace(-4.0, 4.0, nodes)
    p = rng.uniform(1.0, 3.0, size=(lines, 1))
    c = rng.uniform(0.5, 2.0, size=(lines, 1))
    return x, c * np.abs(x) ** p


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--lines", type=int, default=256)
    ap.add_argument("--nodes", type=int, default=513)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    if kernels._compiled is None:
        raise SystemExit("compiled kernels are not built; run pip install -e . --no-build-isolation")
    x, f = _rows(args.lines, args.nodes)
    y = np.linspace(-10.0, 10.0, args.nodes)
    cases = {
        "legendre_lines": lambda b: kernels.legendre_lines(x, f, y, backend=b),
        "lower_envelope_lines": lambda b: kernels.lower_envelope_lines(x, f + np.sin(3 * x), backend=b),
    }
    print(f"{'kernel':<22}{'cython s':>12}{'python s':>12}{'speedup':>10}  identical")
    for name, run in cases.items():
        tc, oc = _best(lambda: run("cython"), args.repeat)
        tp, op = _best(lambda: run("python"), args.repeat)
        oc, op = (oc, op) if isinstance(oc, tuple) else ((oc,), (op,))
        same = all(np.array_equal(a, b) for a, b in zip(oc, op))
        print(f"{name:<22}{tc:>12.4f}{tp:>12.4f}{tp / tc:>10.1f}  {same}")


if __name__ == "__main__":
    main()
