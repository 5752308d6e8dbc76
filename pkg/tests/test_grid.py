import math

import numpy as np
import pytest

from rocflow import grid as G
from rocflow.errors import GridTooCoarse, OverlapMismatch
from rocflow.grid import NORTH, SOUTH, SupportField


def test_chart_normal_poles_and_equator():
    np.testing.assert_allclose(G.chart_normal(0j, NORTH), [0, 0, 1])
    np.testing.assert_allclose(G.chart_normal(0j, SOUTH), [0, 0, -1])
    np.testing.assert_allclose(G.chart_normal(1 + 0j, NORTH), [1, 0, 0], atol=1e-15)


def test_charts_compose_to_identity_on_overlap():
    rng = np.random.default_rng(1)
    rad = rng.uniform(1 / G.R_CHART, G.R_CHART, 200)
    xi = rad * np.exp(1j * rng.uniform(0, 2 * np.pi, 200))
    a = G.chart_normal(xi, NORTH)
    b = G.chart_normal(G.transfer_coordinate(xi), SOUTH)
    np.testing.assert_allclose(a, b, atol=1e-14)
    np.testing.assert_allclose(np.linalg.norm(a, axis=1), 1.0)


def test_normal_to_chart_inverts_chart_normal():
    xi = np.array([0.3 - 0.2j, -0.7 + 0.9j, 1.1j])
    for cid in (NORTH, SOUTH):
        np.testing.assert_allclose(G.normal_to_chart(G.chart_normal(xi, cid), cid), xi, atol=1e-14)


def test_grid_is_odd_and_centered():
    g = G.chart_geometry(33)
    assert g.size == 33 + 2 * G.GHOST
    assert g.xi[g.center, g.center] == 0
    assert g.h == pytest.approx(2 * G.R_CHART / 32)
    assert g.interior.sum() > g.owned.sum()


@pytest.mark.parametrize("n", [16, 9])
def test_too_coarse_or_even_grids_rejected(n):
    with pytest.raises(GridTooCoarse):
        G.chart_geometry(n)


def test_finite_differences_are_fourth_order():
    errs = []
    for n in (33, 65):
        g = G.chart_geometry(n)
        f = np.sin(g.xi.real) * np.exp(0.5 * g.xi.imag)
        exact = np.cos(g.xi.real) * np.exp(0.5 * g.xi.imag)
        exact_xy = 0.5 * exact
        m = g.interior
        errs.append((np.abs(G.d_x(f, g.h) - exact)[m].max(), np.abs(G.d_xy(f, g.h) - exact_xy)[m].max()))
    for e1, e2 in zip(*errs):
        assert math.log2(e1 / e2) == pytest.approx(4.0, abs=0.3)


def test_interpolation_order():
    errs = []
    for n in (33, 65):
        g = G.chart_geometry(n)
        f = np.cos(1.3 * g.xi.real) * np.sin(0.7 * g.xi.imag + 0.2)
        pts = np.array([0.123 + 0.456j, -0.91 + 0.05j, 0.6 - 0.77j])
        exact = np.cos(1.3 * pts.real) * np.sin(0.7 * pts.imag + 0.2)
        errs.append(np.abs(G.interpolate(f, g.h, pts) - exact).max())
    assert errs[1] < errs[0] / 10


def test_sphere_integral_of_one_is_four_pi():
    g = G.chart_geometry(65)
    one = np.ones((g.size, g.size))
    assert G.sphere_integral(one, one, g) == pytest.approx(4 * math.pi, rel=1e-6)


def test_pou_weights_sum_to_one_across_charts():
    g = G.chart_geometry(33)
    sel = g.annulus
    w_other = G.pou_weight(G.transfer_coordinate(g.xi[sel]))
    np.testing.assert_allclose(g.pou[sel] + w_other, 1.0, atol=1e-12)


def test_support_field_overlap_consistency():
    f = SupportField.from_function(lambda n: 1 + 0.05 * n[..., 0] * n[..., 2], 33)
    assert f.overlap_error() <= G.overlap_tolerance(f.h, f.scale)


def test_corrupted_overlap_is_rejected():
    f = SupportField.sphere(1.0, 33)
    north, south = f.arrays()
    north = north.copy()
    north[f.geometry.annulus] += 1e-3
    with pytest.raises(OverlapMismatch):
        SupportField.from_arrays(north, south)


def test_recentering_makes_support_positive():
    # a unit ball centred at (0, 0, 1.5) does not contain the origin
    f = SupportField.from_function(lambda n: 1.0 + 1.5 * n[..., 2], 33)
    g = f.geometry
    assert f.north.values[g.interior].min() > 0 and f.south.values[g.interior].min() > 0
    # Steiner point at the origin up to the N=33 quadrature error
    np.testing.assert_allclose(f.steiner_point(), 0.0, atol=1e-5)


def test_fill_fringe_reproduces_analytic_values():
    g = G.chart_geometry(65)
    func = lambda n: 1 + 0.1 * n[..., 0] ** 2
    north = func(G.chart_normal(g.xi, NORTH))
    south = func(G.chart_normal(g.xi, SOUTH))
    n2, s2 = north.copy(), south.copy()
    n2[g.fringe] = 0.0
    s2[g.fringe] = 0.0
    G.fill_fringe(n2, s2, g)
    assert np.abs(n2 - north).max() < 1e-6
    assert np.abs(s2 - south).max() < 1e-6
