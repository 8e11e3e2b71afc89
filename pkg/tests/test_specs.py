import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lmahler.convex_core.geometry import ConeRegion, LinearMap, sign_patterns
from lmahler.convex_core.specs import (
    MaxAffine,
    ParallelogramIndicator,
    SpecError,
    compose_linear,
    parse_spec,
)
from lmahler.verify import CATALOG_2D

WITH_CONJUGATE = [
    "gaussian",
    "pnorm p=1",
    "pnorm p=1.5",
    "pnorm p=3 scale=2",
    "quadratic A=[[2,1],[1,1]]",
    "cube_indicator r=1",
    "parallelogram_norm w1=[1,0.3] w2=[-0.2,1]",
    "parallelogram_indicator u1=[1,0.3] u2=[-0.2,1]",
    "mixed c=0.5 b=3 basis=[[1,0.3],[0.2,1]]",
    "max_affine seed=3 k=5 quad_eps=0",
]


@pytest.mark.parametrize("text", CATALOG_2D)
def test_text_round_trip(text):
    spec = parse_spec(text, 2)
    again = parse_spec(spec.text(), 2)
    x = np.random.default_rng(0).normal(size=(50, 2))
    np.testing.assert_array_equal(spec.evaluate(x), again.evaluate(x))


@pytest.mark.parametrize("text", CATALOG_2D)
def test_even_and_minimal_at_origin(text):
    spec = parse_spec(text, 2)
    x = np.random.default_rng(1).normal(size=(200, 2)) * 2
    np.testing.assert_array_equal(spec.evaluate(x), spec.evaluate(-x))
    assert spec.evaluate(np.zeros(2)) == 0.0
    assert np.all(spec.evaluate(x) >= 0)


@pytest.mark.parametrize("text", CATALOG_2D)
def test_midpoint_convexity(text):
    spec = parse_spec(text, 2)
    rng = np.random.default_rng(2)
    a, b = rng.normal(size=(2, 500, 2))
    fa, fb = spec.evaluate(a), spec.evaluate(b)
    ok = np.isfinite(fa) & np.isfinite(fb)
    mid = spec.evaluate(0.5 * (a[ok] + b[ok]))
    assert np.all(mid <= 0.5 * (fa[ok] + fb[ok]) + 1e-12)


@pytest.mark.parametrize("text", WITH_CONJUGATE)
def test_fenchel_young_for_closed_form_conjugates(text):
    spec = parse_spec(text, 2)
    dual = spec.conjugate()
    assert dual is not None
    rng = np.random.default_rng(3)
    x, y = rng.normal(size=(2, 400, 2))
    gap = spec.evaluate(x) + dual.evaluate(y) - np.sum(x * y, axis=-1)
    assert np.all(gap[np.isfinite(gap)] >= -1e-10)


@pytest.mark.parametrize("text", ["gaussian", "pnorm p=1.5", "quadratic A=[[2,1],[1,1]]"])
def test_fenchel_young_equality_at_gradients(text):
    spec = parse_spec(text, 2)
    x = np.random.default_rng(4).normal(size=(100, 2))
    y = spec.grad(x)
    gap = spec.evaluate(x) + spec.conjugate().evaluate(y) - np.sum(x * y, axis=-1)
    np.testing.assert_allclose(gap, 0.0, atol=1e-10)


@pytest.mark.parametrize("text", ["gaussian", "pnorm p=1.5", "quadratic A=[[2,1],[1,1]]"])
def test_gradient_matches_finite_differences(text):
    spec = parse_spec(text, 2)
    x = np.random.default_rng(5).normal(size=(20, 2))
    h = 1e-6
    fd = np.stack([(spec.evaluate(x + h * e) - spec.evaluate(x - h * e)) / (2 * h) for e in np.eye(2)], axis=-1)
    np.testing.assert_allclose(spec.grad(x), fd, rtol=1e-6, atol=1e-6)


@pytest.mark.parametrize("text", [
    "", "bogus", "pnorm p=0.5", "pnorm p=1 scale=-1", "quadratic A=[[1,2],[2,1]]",
    "pnorm p", "cube_indicator r=[1", "parallelogram_indicator u1=[1,0] u2=[2,0]",
    "max_affine k=0", "gaussian linear=[[1,0],[0,0]]",
])
def test_bad_specs_raise(text):
    with pytest.raises(SpecError):
        parse_spec(text, 2)


def test_dimension_mismatch():
    with pytest.raises(SpecError):
        parse_spec("quadratic A=[[2,1],[1,1]]", 3)


def test_max_affine_seeded_distribution():
    spec = MaxAffine(seed=7, k=4000)
    assert abs(spec.a.mean()) < 0.05 and abs(spec.a.std() - 1) < 0.05
    assert spec.b.min() >= 0 and spec.b.max() <= 1 and abs(spec.b.mean() - 0.5) < 0.02
    np.testing.assert_array_equal(MaxAffine(seed=7, k=3).a, MaxAffine(seed=7, k=3).a)


def test_unconditional_max_affine_is_sign_invariant():
    spec = parse_spec("max_affine seed=0 k=2 quad_eps=0.1 n=3 unconditional=true", 3)
    x = np.random.default_rng(6).normal(size=(100, 3))
    for s in sign_patterns(3):
        np.testing.assert_allclose(spec.evaluate(x * np.array(s)), spec.evaluate(x), rtol=1e-14)


@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(0.3, 3))
def test_composition_with_linear_map(a, b, scale):
    T = LinearMap([[scale, a], [0.0, 1.0 + b * b]])
    spec = parse_spec("pnorm p=1.5")
    comp = compose_linear(spec, T)
    x = np.array([[0.3, -1.2], [2.0, 0.5]])
    np.testing.assert_allclose(comp.evaluate(x), spec.evaluate(T(x)), rtol=1e-12)
    # L(f o T) = Lf o T^{-*}
    y = np.array([[0.1, 0.2], [-0.4, 0.3]])
    np.testing.assert_allclose(comp.conjugate().evaluate(y), spec.conjugate().evaluate(T.adjoint_inverse()(y)),
                               rtol=1e-10)


def test_parallelogram_polarity():
    K = ParallelogramIndicator([1.0, 0.3], [-0.2, 1.0])
    dual = K.conjugate()
    # the gauge of K* is the support function of K
    y = np.random.default_rng(7).normal(size=(50, 2))
    support = np.max(y @ K.vertices().T, axis=-1)
    np.testing.assert_allclose(dual.evaluate(y), support, rtol=1e-12)


def test_cone_regions():
    q = ConeRegion.orthant((1, -1))
    assert q.contains(np.array([1.0, -2.0])) and not q.contains(np.array([1.0, 2.0]))
    c = ConeRegion.between((1, 0), (0, 1))
    assert c.contains(np.array([0.5, 0.5])) and not c.contains(np.array([-0.5, 0.5]))
    with pytest.raises(ValueError):
        ConeRegion.between((0, 1), (1, 0))
    assert len(sign_patterns(3)) == 8


def test_linear_map_column_norm_and_singular():
    T = LinearMap([[3.0, 0.0], [4.0, 1.0]])
    assert T.column_norm() == 5.0
    with pytest.raises(ValueError):
        LinearMap([[1.0, 2.0], [2.0, 4.0]])
