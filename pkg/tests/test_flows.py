from fractions import Fraction as Fr

import numpy as np
import pytest
import sympy as sp

from rocflow import make_flow, eval_jet, parabolicity, classify_flow, flow_from_expression
from rocflow.errors import BadParams, OutOfDomain
from rocflow.flows import hessian_column
from rocflow.verify import CATALOG_CASES, cone_points

CONE = ((1.0, 3.0), (0.0, lambda p: 0.9 * p))


def sympy_jet(expr_fn, psi, s):
    """Exact jet from sympy (independent of the closed forms in the catalog)."""
    P, S = sp.symbols("P S", positive=True)
    K = expr_fn(P, S)
    at = {P: sp.Rational(psi), S: sp.Rational(s)}
    parts = [K, sp.diff(K, P), sp.diff(K, S), sp.diff(K, P, 2), sp.diff(K, P, S), sp.diff(K, S, 2)]
    return [sp.nsimplify(sp.simplify(e.subs(at))) for e in parts]


def assert_jet(jet, expected, tol=1e-14):
    np.testing.assert_allclose(jet.as_tuple(), [float(v) for v in expected], rtol=tol, atol=tol)


@pytest.mark.parametrize(
    "cid,params,point,expected",
    [
        ("mean_curv_pow", {"n": 1}, (2, 1),
         [Fr(2, 3), Fr(-5, 9), Fr(4, 9), Fr(28, 27), Fr(-26, 27), Fr(28, 27)]),
        ("gauss_curv_pow", {"n": 1}, (2, 1),
         [Fr(1, 3), Fr(-4, 9), Fr(2, 9), Fr(26, 27), Fr(-16, 27), Fr(14, 27)]),
        ("linear_weingarten", {"a": 1, "b": 2, "c": 1}, (2, 1),
         [Fr(4), Fr(-8, 3), Fr(2), Fr(46, 9), Fr(-40, 9), Fr(14, 3)]),
        # K20 = 2n... for psi^-1 is 2/psi^3 = 1/4 at psi = 2
        ("mean_radius_pow", {"n": 1}, (2, Fr(1, 2)),
         [Fr(1, 2), Fr(-1, 4), 0, Fr(1, 4), 0, 0]),
    ],
)
def test_catalog_jets(cid, params, point, expected):
    assert_jet(eval_jet(make_flow(cid, **params), *map(float, point)), expected)


@pytest.mark.parametrize(
    "cid,params,expr",
    [
        ("mean_curv_pow", {"n": 1}, lambda P, S: P / (P**2 - S**2)),
        ("mean_curv_pow", {"n": -1}, lambda P, S: -(P / (P**2 - S**2)) ** -1),
        ("gauss_curv_pow", {"n": 1}, lambda P, S: 1 / (P**2 - S**2)),
        ("mean_radius_pow", {"n": 1}, lambda P, S: 1 / P),
        ("linear_weingarten", {"a": 1, "b": 2, "c": 1}, lambda P, S: 1 + (4 * P + 1) / (P**2 - S**2)),
    ],
)
def test_catalog_jets_match_computer_algebra(cid, params, expr):
    for point in ((2, 1), (Fr(3, 2), Fr(1, 3))):
        assert_jet(eval_jet(make_flow(cid, **params), *map(float, point)), sympy_jet(expr, *point), tol=1e-13)


def test_geometric_mean_curvature_normalisation():
    f = make_flow("mean_curv_pow", n=1, norm="geometric")
    j = f.jet(1.0, 0.0)
    assert j.K == pytest.approx(2.0) and j.K10 == pytest.approx(-2.0)
    table = make_flow("mean_curv_pow", n=1).jet(2.0, 1.0)
    np.testing.assert_allclose(f.jet(2.0, 1.0).as_tuple(), 2 * np.array(table.as_tuple()))
    assert "norm=geometric" in f.describe()
    assert make_flow("mean_curv_pow", **f.catalog_params).describe() == f.describe()


@pytest.mark.parametrize(
    "cid,params",
    [
        ("mean_curv_pow", {"n": 0}),
        ("gauss_curv_pow", {"n": 0.0}),
        ("mean_radius_pow", {"n": float("nan")}),
        ("mean_curv_pow", {"n": 1, "a": 2}),
        ("linear_weingarten", {"a": 1, "b": 0, "c": 1}),
        ("linear_weingarten", {"a": -1, "b": 2, "c": 1}),
        ("linear_weingarten", {"a": 1, "b": 2}),
        ("mean_curv_pow", {"n": 1, "norm": "other"}),
        ("willmore", {"n": 1}),
    ],
)
def test_bad_parameters(cid, params):
    with pytest.raises(BadParams):
        make_flow(cid, **params)


def test_bloore_flag():
    assert "bloore" in make_flow("linear_weingarten", a=1, b=2, c=1).flags
    assert "bloore" not in make_flow("linear_weingarten", a=1, b=1, c=2).flags
    assert "bloore" not in make_flow("linear_weingarten", a=2, b=2, c=1).flags


@pytest.mark.parametrize("cid,params", CATALOG_CASES)
def test_out_of_cone_rejected(cid, params):
    f = make_flow(cid, **params)
    with pytest.raises(OutOfDomain):
        eval_jet(f, 1.0, 1.0)
    with pytest.raises(OutOfDomain):
        eval_jet(f, 1.0, -0.1)


@pytest.mark.parametrize("cid,params", CATALOG_CASES)
def test_sign_discipline(cid, params):
    f = make_flow(cid, **params)
    psi, s = cone_points(200, seed=7)
    K = np.asarray(f(psi, s))
    if f.sign == "contracting":
        assert np.all(K >= 0)
    else:
        assert f.sign == "expanding" and np.all(K <= 0)
    np.testing.assert_allclose(K, f.jet(psi, s).K, rtol=1e-14)


@pytest.mark.parametrize("cid,params", CATALOG_CASES)
def test_first_and_second_partials_against_differences(cid, params):
    f = make_flow(cid, **params)
    psi, s = cone_points(100, seed=11)
    hp = 1e-5 * np.maximum(1, np.maximum(psi, s))
    j = f.jet(psi, s)
    jp, jm = f.jet(psi + hp, s), f.jet(psi - hp, s)
    sp_, sm = f.jet(psi, s + hp), f.jet(psi, s - hp)
    rel = lambda a, b: np.abs(a - b) / np.maximum(np.abs(b), 1e-12 * np.max(np.abs(b)) + 1e-300)
    assert rel((jp.K - jm.K) / (2 * hp), j.K10).max() < 1e-6
    assert rel((sp_.K - sm.K) / (2 * hp), j.K01).max() < 1e-6 or np.all(np.asarray(j.K01) == 0)
    assert rel((jp.K10 - jm.K10) / (2 * hp), j.K20).max() < 1e-5 or np.all(np.asarray(j.K20) == 0)
    d11 = (sp_.K10 - sm.K10) / (2 * hp)
    assert np.abs(d11 - j.K11).max() <= 1e-5 * max(np.abs(j.K11).max(), 1e-12) + 1e-12


@pytest.mark.parametrize("cid,params", CATALOG_CASES)
def test_hessian_column(cid, params):
    f = make_flow(cid, **params)
    psi, s = cone_points(100, seed=13)
    j = f.jet(psi, s)
    col = hessian_column(cid, params, psi, s)
    direct = j.K20 * j.K02 - j.K11**2
    scale = np.maximum(np.maximum(np.abs(col), np.abs(j.K20 * j.K02)), 1e-300)
    assert (np.abs(direct - col) / scale).max() < 1e-10


def test_gauss_hessian_example():
    j = make_flow("gauss_curv_pow", n=1).jet(2.0, 1.0)
    assert j.hessian_det == pytest.approx(12 / 3**4, rel=1e-12)
    assert hessian_column("gauss_curv_pow", {"n": 1}, 2.0, 1.0) == pytest.approx(12 / 81, rel=1e-12)


def test_parabolicity_examples():
    assert parabolicity(make_flow("mean_curv_pow", n=1).jet(2.0, 1.0)) == pytest.approx(1 / 9)
    assert parabolicity(make_flow("linear_weingarten", a=1, b=2, c=1).jet(2.0, 1.0)) == pytest.approx(2 / 3)
    assert parabolicity(flow_from_expression("1").jet(2.0, 1.0)) == 0


def test_classify_mean_curvature():
    rep = classify_flow(make_flow("mean_curv_pow", n=1), CONE)
    assert rep.parabolic.ok and rep.convex.ok
    assert rep.thm3_contracting_ok
    assert rep.samples > 1000


def test_classify_linear_weingarten_convex():
    rep = classify_flow(make_flow("linear_weingarten", a=1, b=2, c=1), CONE)
    assert rep.parabolic.ok and rep.convex.ok


def test_classify_mean_radius_expanding_is_concave():
    rep = classify_flow(make_flow("mean_radius_pow", n=-1), CONE)
    assert rep.parabolic.ok and rep.concave.ok
    assert rep.thm3_expanding_ok


def test_classify_reports_worst_location():
    rep = classify_flow(flow_from_expression("1"), CONE, samples=16)
    assert not rep.parabolic.ok
    assert rep.parabolic.worst == 0
    p, s = rep.parabolic.at
    assert p > s >= 0


def test_gauss_quarter_power_convexity_report():
    # |Hess K| = 4 n^2 (2n + 1) / D^(2n+2) is positive for every n > -1/2, so the
    # sampled report is convex; the report carries a note about the stated range
    rep = classify_flow(make_flow("gauss_curv_pow", n=0.25), CONE)
    assert rep.convex.ok
    assert any("n >= 1/2" in note for note in rep.notes)


def test_classify_rejects_region_outside_cone():
    with pytest.raises(OutOfDomain):
        classify_flow(make_flow("mean_curv_pow", n=1), ((-1.0, 1.0), (0.0, 0.5)))
