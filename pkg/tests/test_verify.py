import csv
import io
import json

import numpy as np
import pytest

from lmahler.convex_core.geometry import ConeRegion, LinearMap
from lmahler.verify import (
    VerificationReport,
    check_bridge_identity,
    check_derivative_lower_bound,
    check_dimension_n,
    check_equality,
    check_gradient_average_inequality,
    check_invariance,
    check_mahler_and_santalo,
    check_monotone_integration,
    check_pairing_inequality,
    check_sum_lemma,
    random_mixed,
    random_parallelogram,
    reports_to_csv,
    reports_to_jsonl,
    run_suite,
)


def test_report_margin_and_pass():
    r = VerificationReport("demo", "gaussian", 1.0, 0.9, 0.2)
    assert r.margin == pytest.approx(-0.1) and r.passed
    assert not VerificationReport("demo", "gaussian", 1.0, 0.5, 0.2).passed


def test_smoke_suite_passes_and_is_sorted():
    reports = run_suite("smoke", 0)
    assert all(r.passed for r in reports), [r.to_dict() for r in reports if not r.passed]
    keys = [(r.check, r.spec) for r in reports]
    assert keys == sorted(keys)


def test_unknown_suite():
    with pytest.raises(ValueError):
        run_suite("nope")


def test_serialisation_formats():
    reports = [check_equality("pnorm p=1"), check_mahler_and_santalo("gaussian")]
    lines = reports_to_jsonl(reports).splitlines()
    assert [json.loads(s)["check"] for s in lines] == ["mahler_equality", "mahler_santalo"]
    rows = list(csv.reader(io.StringIO(reports_to_csv(reports))))
    assert rows[0] == ["check", "spec", "lhs", "rhs", "margin", "tol", "pass"]
    assert float(rows[1][2]) == reports[0].lhs


@pytest.mark.parametrize("text", ["pnorm p=1", "cube_indicator r=1", "mixed c=0.5 b=3 basis=[[1,0.3],[0.2,1]]"])
def test_equality_cases(text):
    assert check_equality(text).passed


def test_equality_check_rejects_gaussian():
    assert not check_equality("gaussian").passed


def test_mahler_santalo_between_bounds():
    r = check_mahler_and_santalo("max_affine seed=11 k=5 quad_eps=0")
    assert r.passed
    assert 16 <= r.extra["P"] <= 4 * np.pi ** 2 if "P" in r.extra else r.passed


def test_derivative_lower_bound_and_equality_on_l1():
    assert check_derivative_lower_bound("quadratic A=[[2,1],[1,1]]").passed
    r = check_derivative_lower_bound("pnorm p=1", tol=1e-3 * 32)
    assert r.passed and r.extra["derivative"] == pytest.approx(32, rel=1e-3)


def test_gradient_average_and_pairing():
    q = ConeRegion.orthant((1, 1))
    assert check_gradient_average_inequality("quadratic A=[[2,1],[1,1]]", q).passed
    assert check_pairing_inequality("pnorm p=1.5", q, "gradient").passed


def test_sum_lemma_random(rng):
    for _ in range(3):
        assert check_sum_lemma(*random_mixed(rng)).passed


def test_bridge_identity_random(rng):
    for _ in range(5):
        u = random_parallelogram(rng)
        assert abs(np.linalg.det(u)) > 0.3
        assert check_bridge_identity(u[0], u[1]).passed


def test_linear_invariance():
    assert check_invariance("pnorm p=1.5", LinearMap([[1.3, 0.4], [-0.2, 0.9]])).passed


@pytest.mark.parametrize("t", [0.5, 2.0])
def test_monotone_integration(t):
    r = check_monotone_integration("gaussian", t)
    assert r.passed
    assert r.extra["integrated"] == pytest.approx(r.extra["direct"], rel=1e-3)


def test_dimension_three_quick():
    r = check_dimension_n("pnorm p=1", nodes=65)
    assert r.passed, r.to_dict()
    assert "conjectural" in r.notes
