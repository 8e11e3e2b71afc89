import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lmahler.legendre import kernels

needs_compiled = pytest.mark.skipif(kernels._compiled is None, reason="compiled kernels not built")


def _convex_rows(rng, lines, n):
    x = np.linspace(-3, 3, n)
    p = rng.uniform(1, 3, size=(lines, 1))
    return x, rng.uniform(0.2, 2, size=(lines, 1)) * np.abs(x) ** p


@needs_compiled
@given(st.integers(2, 120), st.integers(1, 20), st.integers(0, 10_000))
def test_backends_agree_bitwise(n, lines, seed):
    rng = np.random.default_rng(seed)
    x, f = _convex_rows(rng, lines, n)
    f[rng.random(f.shape) < 0.1] = np.inf
    y = np.linspace(-5, 5, n + 3)
    vc, ac = kernels.legendre_lines(x, f, y, backend="cython")
    vp, ap = kernels.legendre_lines(x, f, y, backend="python")
    np.testing.assert_array_equal(vc, vp)
    np.testing.assert_array_equal(ac, ap)
    np.testing.assert_array_equal(kernels.lower_envelope_lines(x, f, backend="cython"),
                                  kernels.lower_envelope_lines(x, f, backend="python"))


@pytest.mark.parametrize("backend", ["python", pytest.param("cython", marks=needs_compiled)])
def test_line_transform_matches_brute_force(backend):
    rng = np.random.default_rng(0)
    x, f = _convex_rows(rng, 7, 101)
    y = np.linspace(-8, 8, 77)
    vals, arg = kernels.legendre_lines(x, f, y, backend=backend)
    brute = np.max(y[None, :, None] * x[None, None, :] - f[:, None, :], axis=-1)
    np.testing.assert_allclose(vals, brute, atol=1e-12, rtol=0)
    picked = y[None, :] * x[arg] - np.take_along_axis(f, arg, axis=1)
    np.testing.assert_allclose(picked, vals, atol=1e-12, rtol=0)


def test_tie_prefers_interior_node():
    # f = |x| and y = 1: every x >= 0 attains the sup 0, the box end must not be reported
    x = np.linspace(-2, 2, 9)
    _, arg = kernels.legendre_lines(x, np.abs(x)[None, :], np.array([1.0]), backend="python")
    assert 0 < arg[0, 0] < 8


@pytest.mark.parametrize("backend", ["python", pytest.param("cython", marks=needs_compiled)])
def test_lower_envelope_of_two_wells(backend):
    x = np.linspace(-3, 3, 61)
    f = np.minimum(np.abs(x - 1), np.abs(x + 1))[None, :]
    env = kernels.lower_envelope_lines(x, f, backend=backend)[0]
    expected = np.maximum(np.abs(x) - 1, 0.0)
    np.testing.assert_allclose(env, expected, atol=1e-12)


@needs_compiled
def test_threads_do_not_change_results(monkeypatch):
    rng = np.random.default_rng(1)
    x, f = _convex_rows(rng, 64, 65)
    y = np.linspace(-4, 4, 65)
    one = kernels.legendre_lines(x, f, y)
    monkeypatch.setenv("LM_THREADS", "4")
    four = kernels.legendre_lines(x, f, y)
    np.testing.assert_array_equal(one[0], four[0])


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.legendre_lines(np.zeros(3), np.zeros((1, 3)), np.zeros(3), backend="fortran")
