import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lmahler.convex_core.geometry import ConeRegion, sign_patterns
from lmahler.convex_core.grid import make_axes, sample
from lmahler.convex_core.specs import parse_spec
from lmahler.equipartition import strong_equipartition_map
from lmahler.legendre import chart as chart_mod
from lmahler.legendre.transform import gradient, gradient_cone_membership
from lmahler.measures.flux import (
    boundary_flux_gradient_image,
    boundary_flux_quadrant,
    boundary_moment_quadrant,
    gradient_image_flux,
    green_identities,
)
from lmahler.measures.integrals import (
    build_pair,
    gradient_partition,
    partial_product_F,
    volume_product,
    volume_product_scaled,
    vp_derivative_closed,
    vp_derivative_fd,
)
from lmahler.measures.polyhedral import (
    clip_halfplane,
    exact_integrals,
    polar_polygon,
    polygon_area,
    polygon_integrals,
)
from lmahler.measures.quadrature import entropy_mass, integrate, mass
from lmahler.verify import CATALOG_2D

TWO_PI = 2 * math.pi


def _grid(text, n=2, half=None, nodes=513):
    from lmahler.measures.integrals import default_grid

    spec = parse_spec(text, n)
    axes = make_axes(half, nodes, n) if half else default_grid(spec, n, nodes)
    return sample(spec, axes, n)


@pytest.mark.parametrize("text,expected_mass,expected_entropy", [
    ("pnorm p=1", 4.0, 8.0),
    ("gaussian", TWO_PI, TWO_PI),
])
def test_plane_masses(text, expected_mass, expected_entropy):
    f = _grid(text)
    assert mass(f) == pytest.approx(expected_mass, rel=2e-4)
    assert entropy_mass(f) == pytest.approx(expected_entropy, rel=2e-4)


def test_line_entropy_of_abs():
    f = _grid("pnorm p=1", n=1, nodes=4097)
    assert entropy_mass(f) == pytest.approx(2.0, rel=1e-6)


def test_indicator_entropy_vanishes():
    f = _grid("cube_indicator r=1", half=1.5, nodes=129)
    assert entropy_mass(f) == 0.0


@pytest.mark.parametrize("text", ["gaussian", "pnorm p=1.5", "quadratic A=[[2,1],[1,1]]"])
def test_opposite_orthants_equal_and_sum_to_total(text):
    f = _grid(text, nodes=257)
    parts = {s: mass(f, ConeRegion.orthant(s)) for s in sign_patterns(2)}
    assert parts[(1, 1)] == pytest.approx(parts[(-1, -1)], rel=1e-12)
    assert parts[(1, -1)] == pytest.approx(parts[(-1, 1)], rel=1e-12)
    # the iterated rule is not additive across cells, only consistent
    assert sum(parts.values()) == pytest.approx(mass(f), rel=1e-3)


def test_richardson_error_is_honest():
    f = _grid("gaussian", nodes=129)
    res = integrate(f)
    assert abs(res.mass - TWO_PI) <= 3 * res.mass_error + 1e-12


@pytest.mark.parametrize("angle", [0.3, 1.0, 2.0])
def test_generator_cone_mass_of_radial_function(angle):
    f = _grid("gaussian", nodes=257)
    cone = ConeRegion.between((1.0, 0.0), (math.cos(angle), math.sin(angle)))
    assert mass(f, cone) == pytest.approx(angle, rel=2e-3)


def test_polygon_clipping_and_area():
    sq = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])
    half = clip_halfplane(sq, np.array([1.0, 1.0]))
    assert polygon_area(half) == pytest.approx(2.0, rel=1e-14)
    m, e = polygon_integrals(sq, np.zeros(2), 0.0)
    assert (m, e) == (pytest.approx(4.0), 0.0)


@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-1, 1))
def test_polygon_integrals_of_affine_function(gx, gy, c):
    # over the unit square, int e^{-(a x + b y + c)} factorises
    sq = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])

    def one(a):
        return 1.0 if abs(a) < 1e-12 else -math.expm1(-a) / a

    m, _ = polygon_integrals(sq, np.array([gx, gy]), c)
    assert m == pytest.approx(math.exp(-c) * one(gx) * one(gy), rel=1e-9)


def test_polar_polygon_of_square_is_diamond():
    verts = polar_polygon(np.array([[1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]]))
    assert polygon_area(verts) == pytest.approx(2.0, rel=1e-12)


@pytest.mark.parametrize("text", ["pnorm p=1", "parallelogram_norm w1=[1,0.3] w2=[-0.2,1]",
                                  "max_affine seed=3 k=5 quad_eps=0"])
def test_exact_engine_agrees_with_grid(text):
    spec = parse_spec(text, 2)
    exact = exact_integrals(spec)
    f = _grid(text, nodes=1025)
    grid = (mass(f), entropy_mass(f))
    assert grid[0] == pytest.approx(exact[0], rel=2e-3)
    assert grid[1] == pytest.approx(exact[1], rel=5e-3)


def test_thin_parallelogram_keeps_its_tips():
    spec = parse_spec("parallelogram_indicator u1=[0.049,2.0024] u2=[0.1885,-0.6332]")
    assert exact_integrals(spec)[0] == pytest.approx(spec.area(), rel=1e-13)


@pytest.mark.parametrize("text,expected,rel", [
    ("gaussian", TWO_PI ** 2, 2e-3),
    ("pnorm p=1", 16.0, 1e-12),
    ("parallelogram_indicator u1=[1,0.3] u2=[-0.2,1]", 16.0, 1e-12),
    ("cube_indicator r=1", 16.0, 1e-12),
])
def test_volume_products(text, expected, rel):
    assert volume_product(parse_spec(text, 2), 2).value == pytest.approx(expected, rel=rel)


def test_volume_product_line():
    assert volume_product(parse_spec("pnorm p=1"), 1).value == pytest.approx(4.0, rel=1e-6)


@pytest.mark.parametrize("t", [0.5, 1.0, 2.5])
def test_scaled_volume_product_invariance(t):
    pair = build_pair(parse_spec("gaussian"), 2)
    assert volume_product_scaled(pair, t) == pytest.approx(TWO_PI ** 2, rel=3e-3)
    line = build_pair(parse_spec("pnorm p=1"), 1)
    assert volume_product_scaled(line, t) == pytest.approx(4.0, rel=1e-4)


def test_scaled_rejects_nonpositive_t():
    with pytest.raises(ValueError):
        volume_product_scaled(build_pair(parse_spec("pnorm p=1"), 2), 0.0)


def test_derivative_gaussian_and_scale_free():
    pair = build_pair(parse_spec("gaussian"), 2)
    assert vp_derivative_closed(pair) == pytest.approx(2 * TWO_PI ** 2, rel=1e-3)
    line = build_pair(parse_spec("pnorm p=1"), 1)
    assert vp_derivative_fd(line) == pytest.approx(4.0, rel=1e-4)


def test_derivative_of_square_indicator():
    # 2n P - |P| int ||y||_1 e^{-||y||_1} = 64 - 4 * 8 = 32
    pair = build_pair(parse_spec("cube_indicator r=1"), 2)
    assert vp_derivative_closed(pair) == pytest.approx(32.0, rel=1e-12)


@pytest.mark.parametrize("text", CATALOG_2D)
def test_closed_and_fd_derivatives_agree(text):
    pair = build_pair(parse_spec(text, 2), 2)
    c, f = vp_derivative_closed(pair), vp_derivative_fd(pair)
    assert abs(c - f) <= 1e-3 * abs(c)


def test_fd_step_validation():
    with pytest.raises(ValueError):
        vp_derivative_fd(build_pair(parse_spec("pnorm p=1"), 2), h=0.5)


def test_l1_orthant_flux_and_evenness():
    spec = parse_spec("pnorm p=1")
    res = boundary_flux_quadrant(spec, (1, 1), n=2)
    np.testing.assert_allclose(res.vector_flux, [-1.0, -1.0], rtol=1e-12)
    assert res.scalar_moment == 0.0
    opp = boundary_flux_quadrant(spec, (-1, -1), n=2)
    np.testing.assert_allclose(opp.vector_flux, -res.vector_flux)


def test_moment_flux_vanishes_on_grid_faces():
    f = _grid("gaussian", nodes=129)
    assert abs(boundary_moment_quadrant(f, (1, -1))) < 1e-14


def test_strongly_equipartitioned_flux_is_minus_sum_of_axes():
    T, _ = strong_equipartition_map(parse_spec("quadratic A=[[2,1],[1,1]]"))
    spec = parse_spec("quadratic A=[[2,1],[1,1]]").compose(T)
    res = boundary_flux_quadrant(spec, (1, 1), n=2)
    np.testing.assert_allclose(res.vector_flux, [-1.0, -1.0], atol=1e-6)


def test_gaussian_gradient_image_flux_after_equipartition():
    # with f = pi|x|^2/4 the section conjugate is s^2/pi, whose half-line mass is pi/2
    spec = parse_spec("gaussian").compose(strong_equipartition_map(parse_spec("gaussian"))[0])
    for i in range(2):
        w = boundary_flux_gradient_image(spec, (1, 1), i)
        assert w == pytest.approx(-math.pi / 2, rel=1e-6)


@pytest.mark.parametrize("text", ["gaussian", "quadratic A=[[2,1],[1,1]]", "pnorm p=1.5"])
def test_gradient_image_boundary_moment_vanishes(text):
    res = gradient_image_flux(parse_spec(text, 2), (1, 1))
    assert abs(res.scalar_moment) < 1e-6


def test_gradient_image_flux_unconditional_matches_dual_quadrant():
    spec = parse_spec("pnorm p=1.5")
    res = gradient_image_flux(spec, (1, -1))
    dual = boundary_flux_quadrant(spec.conjugate(), (1, -1), n=2)
    np.testing.assert_allclose(res.vector_flux, dual.vector_flux, rtol=1e-5)


@pytest.mark.parametrize("signs", [(1, 1), (1, -1)])
def test_green_identities(signs):
    out = green_identities(parse_spec("quadratic A=[[2,1],[1,1]]"), signs, 2, 513)
    np.testing.assert_allclose(out["gradient_integral"], out["minus_flux"], atol=2e-3)
    assert out["moment_integral"] == pytest.approx(out["n_mass_minus_Q"], abs=2e-3)


def test_gradient_chart_quadratic():
    # f = <Ax, x>/2 with A = [[1, 1/4], [1/4, 1]]: on x_0 = 0, grad f(0, z) = (z/4, z)
    spec = parse_spec("quadratic A=[[1,0.25],[0.25,1]]")
    ch = chart_mod.gradient_chart(spec, 0, np.linspace(-2, 2, 9)[:, None])
    np.testing.assert_allclose(ch.t, ch.samples[:, 0] / 4, atol=1e-9)
    assert ch.residual < 1e-6


def test_gradient_chart_unconditional_is_flat():
    ch = chart_mod.gradient_chart(parse_spec("pnorm p=1.5"), 1, np.linspace(-1, 1, 7)[:, None], n=2)
    np.testing.assert_allclose(ch.t, 0.0, atol=1e-12)


def test_gradient_of_grid_and_inverse_gradients():
    f = _grid("gaussian", half=4.0, nodes=161)
    np.testing.assert_allclose(gradient(f, np.array([1.0, 2.0])), [1.0, 2.0], atol=1e-3)
    g = _grid("pnorm p=1", half=4.0, nodes=161)
    np.testing.assert_allclose(gradient(g, np.array([2.0, 3.0])), [1.0, 1.0], atol=1e-12)


def test_gradient_membership_and_partition():
    pair = build_pair(parse_spec("gaussian"), 2, nodes=129)
    Lf = pair.dual_grid
    assert gradient_cone_membership(Lf, np.array([1.0, 1.0]), (1, 1))
    assert not gradient_cone_membership(Lf, np.array([1.0, 1.0]), (-1, -1))
    parts = gradient_partition(Lf)
    total = sum(parts.values())
    interior = total > 0
    np.testing.assert_allclose(total[interior], 1.0)


def test_partial_products_sum_to_quarter_volume_product():
    spec = parse_spec("quadratic A=[[2,1],[1,1]]")
    T, _ = strong_equipartition_map(spec)
    pair = build_pair(spec.compose(T), 2)
    total = sum(partial_product_F(pair, ConeRegion.orthant(s), s) for s in sign_patterns(2))
    assert total == pytest.approx(volume_product(pair).value / 4, rel=5e-3)


def test_partial_product_unconditional():
    pair = build_pair(parse_spec("pnorm p=1.5"), 2)
    q = ConeRegion.orthant((1, 1))
    lhs = partial_product_F(pair, q, (1, 1))
    rhs = pair.primal(q)[0] * pair.dual(q)[0]
    assert lhs == pytest.approx(rhs, rel=5e-3)
