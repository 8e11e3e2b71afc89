"""Backend selection for the line kernels.

The compiled extension is used when it imports; ``LMAHLER_PURE_PYTHON=1``
forces the fallback. ``LM_THREADS`` splits line batches across threads (the
compiled kernels release the GIL).
"""
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import _fallback

try:
    if os.environ.get("LMAHLER_PURE_PYTHON"):
        raise ImportError("pure Python requested")
    from . import _kernels as _compiled
except ImportError:
    _compiled = None

BACKEND = "cython" if _compiled is not None else "python"


def _impl(backend):
    backend = backend or BACKEND
    if backend == "cython":
        if _compiled is None:
            raise RuntimeError("compiled kernels are not available")
        return _compiled
    if backend == "python":
        return _fallback
    raise ValueError(f"unknown backend {backend!r}")


def _threads():
    try:
        return max(1, int(os.environ.get("LM_THREADS", "1")))
    except ValueError:
        return 1


def _run_chunked(fn, lines, outs, backend):
    # fn(lines_chunk, *out_chunks) over contiguous row blocks
    nthreads = _threads() if (backend or BACKEND) != "python" else 1
    L = lines.shape[0]
    if nthreads == 1 or L < 2 * nthreads:
        fn(lines, *outs)
        return
    bounds = np.linspace(0, L, nthreads + 1).astype(int)
    with ThreadPoolExecutor(nthreads) as pool:
        futs = [
            pool.submit(fn, lines[a:b], *(o[a:b] for o in outs))
            for a, b in zip(bounds[:-1], bounds[1:])
            if b > a
        ]
        for fut in futs:
            fut.result()


def legendre_lines(x, f, y, backend=None):
    """Batch discrete conjugate of the rows of ``f`` (lines, N) over ``x``.

    Returns ``(values, argmax)``, both (lines, M). Among tied maximisers an
    interior node is reported rather than a box end.
    """
    impl = _impl(backend)
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    f = np.ascontiguousarray(f, dtype=np.float64).reshape(-1, x.size)
    out = np.empty((f.shape[0], y.size))
    arg = np.empty((f.shape[0], y.size), dtype=np.intp)
    _run_chunked(lambda rows, o, a: impl.legendre_lines(x, rows, y, o, a), f, (out, arg), backend)
    return out, arg


def lower_envelope_lines(x, f, backend=None):
    """Greatest convex minorant of each row of ``f`` (rows share abscissa ``x``)."""
    impl = _impl(backend)
    x = np.ascontiguousarray(x, dtype=np.float64)
    f = np.ascontiguousarray(f, dtype=np.float64).reshape(-1, x.size)
    out = np.empty_like(f)
    _run_chunked(lambda rows, o: impl.lower_envelope_lines(x, rows, o), f, (out,), backend)
    return out
