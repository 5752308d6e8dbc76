import math

import numpy as np
import pytest

from rocflow import (SimConfig, SupportField, adaptive_dt, advance, compute_roc, flow_from_expression, make_flow,
                     pde_rhs, rocflow_rhs, run_simulation, soliton_residual)
from rocflow.errors import ConfigError, NotParabolic
from rocflow.grid import R_CHART
from rocflow.pde import (MONITOR_COLUMNS, MonitorSeries, mean_radius, monitor_row, rocflow_consistency,
                         sphere_radius_ode, theorem_verdicts)
from rocflow.surfaces import perturbed_sphere
from rocflow.verify import CATALOG_CASES

MCF = make_flow("mean_curv_pow", n=1, norm="geometric")
GAUSS = make_flow("gauss_curv_pow", n=1)
BLOORE = make_flow("linear_weingarten", a=1, b=2, c=1)
MR_EXP = make_flow("mean_radius_pow", n=-1)


def interior(pair):
    m = pair.north.geometry.interior
    return np.concatenate([pair.north.values[m], pair.south.values[m]])


@pytest.mark.parametrize("flow,value", [(MCF, -2.0), (GAUSS, -1.0), (MR_EXP, 1.0),
                                        (make_flow("mean_curv_pow", n=1), -1.0)])
def test_rhs_on_unit_sphere(flow, value):
    rhs = interior(pde_rhs(SupportField.sphere(1.0, 33), flow))
    np.testing.assert_allclose(rhs, value, rtol=1e-13)


def test_rhs_is_nan_on_fringe():
    rhs = pde_rhs(SupportField.sphere(1.0, 33), MCF)
    assert np.all(np.isnan(rhs.north.values[rhs.north.geometry.fringe]))


def test_adaptive_dt_on_sphere():
    f = SupportField.sphere(1.0, 33)
    h = 2 * R_CHART / 32
    wmax = (1 + R_CHART**2) ** 2
    # -K10 = 2 and K01 = 0 at the unit sphere; the largest coefficient sits on the chart rim
    expected = 0.2 * h * h / (0.5 * wmax * 2.0)
    assert adaptive_dt(f, MCF, 0.2) == pytest.approx(expected, rel=1e-12)


def test_adaptive_dt_refinement_scales_by_quarter():
    a = adaptive_dt(SupportField.sphere(1.0, 33), MCF, 0.2)
    b = adaptive_dt(SupportField.sphere(1.0, 65), MCF, 0.2)
    assert b / a == pytest.approx(0.25, rel=1e-12)


def test_constant_flow_is_not_parabolic():
    with pytest.raises(NotParabolic):
        adaptive_dt(SupportField.sphere(1.0, 33), flow_from_expression("1"), 0.2)


def test_zero_step_returns_field():
    f = SupportField.sphere(1.0, 33)
    assert advance(f, MCF, 0.0) is f


def test_single_step_on_sphere():
    g = advance(SupportField.sphere(1.0, 33), MCF, 1e-4)
    m = g.geometry.interior
    for arr in g.arrays():
        np.testing.assert_allclose(arr[m], math.sqrt(1 - 4e-4), atol=1e-10)
    assert g.t == 1e-4


@pytest.mark.parametrize("cid,params", CATALOG_CASES)
def test_round_spheres_stay_round(cid, params):
    flow = make_flow(cid, **params)
    t_end = 0.004
    res = run_simulation(SimConfig(flow, n_core=33, t_max=t_end), SupportField.sphere(1.0, 33))
    assert res.reason == "TMaxReached"
    assert res.monitors.column("max_sigma").max() < 1e-8
    assert np.abs(interior(res.final) - sphere_radius_ode(flow, 1.0, t_end)).max() < 1e-6
    # the quadrature mean agrees to its own (coarser) accuracy
    assert mean_radius(res.final) == pytest.approx(sphere_radius_ode(flow, 1.0, t_end), abs=1e-4)


def test_bloore_sphere_matches_radius_law():
    res = run_simulation(SimConfig(BLOORE, n_core=33, t_max=0.02), SupportField.sphere(1.0, 33))
    r = interior(res.final)
    assert np.abs(r - sphere_radius_ode(BLOORE, 1.0, 0.02)).max() < 1e-6


def test_sphere_radius_oracle():
    assert sphere_radius_ode(MCF, 1.0, 0.2) == pytest.approx(math.sqrt(0.2), abs=1e-12)
    assert sphere_radius_ode(GAUSS, 1.0, 0.1) == pytest.approx(0.7 ** (1 / 3), abs=1e-12)


def test_monitor_series_and_columns():
    roc = compute_roc(perturbed_sphere(33))
    row = monitor_row(roc, MCF)
    assert tuple(row) == MONITOR_COLUMNS
    assert row["min_convexity"] > 0 and row["max_psi"] >= row["min_psi"]
    series = MonitorSeries()
    series.append(row)
    with pytest.raises(ValueError):
        series.append(row)


@pytest.fixture(scope="module")
def mcf_run():
    return run_simulation(SimConfig(MCF, n_core=33, t_max=0.02, monitor_every=2), perturbed_sphere(33))


def test_perturbed_mcf_verdicts(mcf_run):
    assert mcf_run.reason == "TMaxReached"
    assert mcf_run.final.t == 0.02
    assert {k: v.status for k, v in mcf_run.verdicts.items()} == {"thm2": "pass", "thm3": "pass", "thm4": "pass"}
    t = mcf_run.monitors.column("t")
    assert np.all(np.diff(t) > 0)
    assert np.all(mcf_run.monitors.column("min_convexity") > 0)


def test_expanding_branch_verdict():
    res = run_simulation(SimConfig(MR_EXP, n_core=33, t_max=0.05), perturbed_sphere(33))
    v = res.verdicts["thm3"]
    assert v.status == "pass" and "expanding" in v.detail
    assert np.all(np.diff(res.monitors.column("min_psi")) >= 0)


def test_verdict_detects_violation(mcf_run):
    series = MonitorSeries([dict(r) for r in mcf_run.monitors.rows])
    series.rows[-1]["max_psi"] = series.rows[0]["max_psi"] * 1.01
    v = theorem_verdicts(series, MCF, compute_roc(perturbed_sphere(33)))["thm3"]
    prev_min = min(r["max_psi"] for r in series.rows[:-1])
    expected = (series.rows[-1]["max_psi"] - prev_min) / series.rows[0]["max_psi"]
    assert v.status == "fail" and v.worst_violation == pytest.approx(expected, rel=1e-12)
    assert v.at_t == series.rows[-1]["t"]


def test_stop_discipline_convexity_margin():
    res = run_simulation(SimConfig(MCF, n_core=33, t_max=0.1, min_convexity=0.95), SupportField.sphere(1.0, 33))
    assert res.reason == "ConvexityLost"
    assert compute_roc(res.final).convexity_margin > 0.95
    assert res.final.t < 0.1


def test_pinch_off_stops_run():
    res = run_simulation(SimConfig(MCF, n_core=33, t_max=1.0, min_psi_frac=0.9), SupportField.sphere(1.0, 33))
    assert res.reason == "DomainExit" and "pinch" in res.message
    assert res.monitors.rows[-1]["min_psi"] <= 0.9 < res.monitors.rows[-2]["min_psi"]


def test_converged_stop():
    res = run_simulation(SimConfig(MR_EXP, n_core=33, t_max=1.0, converge_tol=0.2), perturbed_sphere(33))
    assert res.reason == "Converged"


def test_non_parabolic_flow_exits_domain():
    res = run_simulation(SimConfig(flow_from_expression("psi"), n_core=33, t_max=0.1), SupportField.sphere(1.0, 33))
    assert res.reason == "DomainExit" and res.steps == 0


@pytest.mark.parametrize("kwargs", [{"n_core": 32}, {"n_core": 31}, {"cfl": 0.0}, {"cfl": 0.6},
                                    {"t_max": 0.0}, {"min_psi_frac": 1.0}, {"monitor_every": 0}])
def test_sim_config_validation(kwargs):
    with pytest.raises(ConfigError):
        SimConfig(MCF, **kwargs)


def test_rocflow_rhs_on_sphere_reaction_limit():
    roc = compute_roc(SupportField.sphere(1.0, 33))
    rates = rocflow_rhs(roc, GAUSS)
    assert not rates.mask.north.values.any()
    z = rocflow_rhs(roc, GAUSS, z_only=True)
    np.testing.assert_allclose(interior(z.dpsi), -1.0, rtol=1e-14)
    np.testing.assert_allclose(interior(z.dsigma), 0.0, atol=1e-14)


def test_rocflow_consistency_mcf():
    rep = rocflow_consistency(perturbed_sphere(65), MCF)
    assert rep.nodes > 1000
    assert rep.rel_err < 5e-3


def test_rocflow_rhs_scaling_for_mean_curvature():
    # K = H has degree -1 in the radii, so both rates scale by 1/mu under dilation
    mu = 2.0
    small = perturbed_sphere(33)
    big = small.with_arrays(*(mu * a for a in small.arrays()))
    a = rocflow_rhs(compute_roc(small), MCF)
    b = rocflow_rhs(compute_roc(big), MCF)
    m = a.mask.north.values & b.mask.north.values
    np.testing.assert_allclose(b.dpsi.north.values[m], a.dpsi.north.values[m] / mu, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(b.dsigma.north.values[m], a.dsigma.north.values[m] / mu, rtol=1e-10, atol=1e-12)


def test_soliton_unit_sphere_mcf():
    rep = soliton_residual(SupportField.sphere(1.0, 33), MCF)
    assert rep.lam == pytest.approx(2.0, rel=1e-14)
    assert rep.max_residual < 1e-12


def test_soliton_sphere_of_radius_two_gauss():
    rep = soliton_residual(SupportField.sphere(2.0, 33), GAUSS)
    assert rep.lam == pytest.approx(1 / 8, rel=1e-14)
    assert rep.max_residual < 1e-12


def test_perturbed_sphere_is_not_a_soliton():
    a = soliton_residual(perturbed_sphere(33), MCF).max_residual
    b = soliton_residual(perturbed_sphere(65), MCF).max_residual
    assert a > 1e-3 and b > 1e-3
    assert b == pytest.approx(a, rel=0.05)
