import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lmahler.convex_core.grid import (
    Axis,
    GridFunction,
    GrowthError,
    UndersampledError,
    check_convex,
    load_grid,
    make_axes,
    sample,
    save_grid,
    truncation_radius,
)
from lmahler.convex_core.specs import parse_spec


def test_axis_nodes_are_symmetric_with_origin():
    ax = Axis.symmetric(3.0, 7)
    np.testing.assert_allclose(ax.coords, [-3, -2, -1, 0, 1, 2, 3])
    assert ax.coords[ax.half] == 0.0
    with pytest.raises(ValueError):
        ax.subsample()
    sub = Axis.symmetric(4.0, 9).subsample()
    np.testing.assert_allclose(sub.coords, [-4, -2, 0, 2, 4])


@pytest.mark.parametrize("count", [2, 4, 1])
def test_axis_rejects_even_counts(count):
    with pytest.raises(ValueError):
        Axis.symmetric(1.0, count)


def test_axis_rejects_asymmetric_box():
    with pytest.raises(ValueError):
        Axis(-1.0, 2.0, 5)


def test_container_round_trip(tmp_path):
    f = sample(parse_spec("pnorm p=1.5"), make_axes([2.0, 3.0], [9, 17]), 2)
    v = f.values.copy()
    v[0, 0] = np.inf
    f = f.with_values(v)
    path = tmp_path / "f.lmgf"
    save_grid(f, path)
    g = load_grid(path)
    assert g.axes == f.axes
    np.testing.assert_array_equal(g.values, f.values)


def test_container_rejects_garbage(tmp_path):
    path = tmp_path / "bad.lmgf"
    path.write_bytes(b"NOPE" + bytes(20))
    with pytest.raises(ValueError):
        load_grid(path)


def test_sampling_refuses_box_smaller_than_domain():
    with pytest.raises(UndersampledError):
        sample(parse_spec("cube_indicator r=2"), make_axes(1.0, 33, 2), 2)


@given(st.floats(-1.9, 1.9), st.floats(-1.9, 1.9))
def test_interpolation_is_exact_on_bilinear_data(x, y):
    axes = make_axes(2.0, 9, 2)
    g = GridFunction(axes, np.zeros((9, 9)))
    p = g.points()
    g = g.with_values(1 + 2 * p[..., 0] - p[..., 1] + 0.5 * p[..., 0] * p[..., 1])
    expected = 1 + 2 * x - y + 0.5 * x * y
    assert math.isclose(float(g.interpolate(np.array([[x, y]]))[0]), expected, abs_tol=1e-12)


def test_interpolation_is_infinite_outside():
    g = sample(parse_spec("gaussian"), make_axes(1.0, 5, 2), 2)
    assert np.isinf(g.interpolate(np.array([[1.5, 0.0]]))[0])


@pytest.mark.parametrize("text", ["gaussian", "pnorm p=1", "max_affine seed=1 k=4"])
def test_sampled_catalog_is_discretely_convex(text):
    f = sample(parse_spec(text, 2), make_axes(4.0, 65, 2), 2)
    ok, worst = check_convex(f)
    assert ok, worst


def test_nonconvex_sample_detected():
    f = sample(parse_spec("gaussian"), make_axes(2.0, 33, 2), 2)
    f = f.with_values(np.cos(f.values))
    assert not check_convex(f)[0]


def test_truncation_radius_laplace_tail():
    # tail of e^{-|x|} in 1D beyond R is e^{-R} of total mass 2, so R ~ log(1/tol)
    R = truncation_radius(parse_spec("pnorm p=1"), 1e-6, 1)
    assert math.exp(-R) <= 1e-6 * 1.01
    assert R < 30


def test_truncation_radius_gaussian_plane():
    R = truncation_radius(parse_spec("gaussian"), 1e-6, 2)
    assert math.exp(-R * R / 2) <= 1e-6 * 1.01
    assert R < 8


def test_growth_error_for_flat_function():
    class Flat:
        bounded = False
        dim = None

        def ndim(self, n=None):
            return n

        def evaluate(self, x):
            return np.zeros(np.asarray(x).shape[:-1])

    with pytest.raises(GrowthError):
        truncation_radius(Flat(), 1e-6, 2)
