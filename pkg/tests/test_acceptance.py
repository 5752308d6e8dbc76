"""Acceptance criteria, one test each.

Every test records a single PASS/FAIL line; the lines are printed together
at the end of the module run (and by ``python tests/test_acceptance.py``).
"""

import math
import time

import numpy as np
import pytest

from rocflow import (SimConfig, SupportField, codazzi_residual, compute_roc, flow_from_expression, integrate_ode,
                     make_flow, run_simulation, soliton_residual)
from rocflow.expr import catalog_expression
from rocflow.flows import classify_flow
from rocflow.geometry import max_interior
from rocflow.ode import certificate_terms
from rocflow.pde import _hypothesis_region, rocflow_consistency
from rocflow.surfaces import perturbed_sphere
from rocflow.verify import CATALOG_CASES, CELLS, check_hessian_column, check_tables_fd, cone_points

MCF = make_flow("mean_curv_pow", n=1, norm="geometric")
GAUSS = make_flow("gauss_curv_pow", n=1)
BLOORE = make_flow("linear_weingarten", a=1, b=2, c=1)
MR_EXP = make_flow("mean_radius_pow", n=-1)

# canonical parameters of the four catalog flows
CANONICAL = [("mean_curv_pow", {"n": 1.0}), ("gauss_curv_pow", {"n": 1.0}),
             ("mean_radius_pow", {"n": 1.0}), ("linear_weingarten", {"a": 1.0, "b": 2.0, "c": 1.0})]

LINES = {}


def record(num, title, ok, detail):
    LINES[num] = f"{'PASS' if ok else 'FAIL'} #{num} {title}: {detail}"
    print(LINES[num])
    assert ok, LINES[num]


@pytest.fixture(scope="module", autouse=True)
def summary(request):
    yield
    rep = request.config.pluginmanager.get_plugin("terminalreporter")
    out = rep.write_line if rep is not None else print
    out("")
    out("acceptance summary")
    for k in sorted(LINES):
        out(LINES[k])


def interior(field):
    m = field.geometry.interior
    return np.concatenate([a[m] for a in field.arrays()])


def test_01_round_sphere_exactness():
    parts, ok = [], True
    for flow, t_end, law, tol in ((MCF, 0.2, lambda t: math.sqrt(1 - 4 * t), 1e-3),
                                  (GAUSS, 0.1, lambda t: (1 - 3 * t) ** (1 / 3), 1e-4)):
        t0 = time.perf_counter()
        res = run_simulation(SimConfig(flow, n_core=65, t_max=t_end), SupportField.sphere(1.0, 65))
        wall = time.perf_counter() - t0
        err = float(np.abs(interior(res.final) - law(t_end)).max())
        good = res.reason == "TMaxReached" and err < tol and wall < 120
        ok &= good
        parts.append(f"{flow.name} t={t_end}: err {err:.2e} (tol {tol:.0e}) in {wall:.1f}s")
    record(1, "round-sphere exactness", ok, "; ".join(parts))


def test_02_codazzi_order():
    def harmonic(n):
        return 1 + 0.05 * (3 * n[..., 2] ** 2 - 1) / 2 + 0.03 * n[..., 0] * n[..., 1]

    res = [max_interior(codazzi_residual(compute_roc(SupportField.from_function(harmonic, k))))
           for k in (33, 65, 129)]
    orders = [math.log2(a / b) for a, b in zip(res, res[1:])]
    ok = all(abs(p - 4) <= 0.5 for p in orders)
    record(2, "Codazzi residual order", ok,
           f"residuals {', '.join(f'{r:.2e}' for r in res)}; orders {', '.join(f'{p:.2f}' for p in orders)}")


def test_03_table_verification():
    first, second = check_tables_fd(CANONICAL, n=100)
    hess = check_hessian_column(CANONICAL, n=100)
    ok = first.passed and second.passed and hess.passed
    record(3, "derivative tables", ok,
           f"first {first.worst:.1e} (<1e-6), second {second.worst:.1e} (<1e-5), Hessian {hess.worst:.1e} (<1e-10)")


def test_04_hamiltonian_conservation():
    path = integrate_ode((2.0, 1.0), GAUSS, 10.0, 1e-4, stop=lambda p, s: p - s < 0.1)
    drifts = [integrate_ode((2.0, 1.0), GAUSS, 1.0, dt).drift for dt in (0.04, 0.02, 0.01)]
    orders = [math.log2(a / b) for a, b in zip(drifts, drifts[1:])]
    order_ok = all(abs(p - 4) <= 0.5 for p in orders)
    ok = path.drift < 1e-8 and order_ok
    record(4, "invariant conservation", ok,
           f"drift {path.drift:.2e} at dt=1e-4 over t={path.t[-1]:.3f} (tol 1e-8); "
           f"refinement orders {', '.join(f'{p:.2f}' for p in orders)}")


@pytest.fixture(scope="module")
def mcf_perturbed():
    return run_simulation(SimConfig(MCF, n_core=33, t_max=0.05, monitor_every=2), perturbed_sphere(33, 0.05))


def test_05_theorem2_monitor():
    res = run_simulation(SimConfig(BLOORE, n_core=33, t_max=0.05, monitor_every=2), perturbed_sphere(33, 0.05))
    v = res.verdicts["thm2"]
    k = res.monitors.column("min_abs_K")
    record(5, "min|K| monitor (Bloore)", v.status == "pass",
           f"{v.status}, worst breach {v.worst_violation:.1e} (rtol 1e-3), min|K| {k[0]:.4f} -> {k[-1]:.4f}")


def test_06_theorem4_monitor(mcf_perturbed):
    v = mcf_perturbed.verdicts["thm4"]
    record(6, "max|sigma| exp(eps t) monitor (MCF)", v.status == "pass",
           f"{v.status}, worst breach {v.worst_violation:.1e} (rtol 1e-3)")


def test_07_theorem3_monitors():
    initial = perturbed_sphere(33, 0.05)
    region = _hypothesis_region(compute_roc(initial))
    parts, ok, ran = [], True, 0
    for cid, params in CATALOG_CASES:
        flow = make_flow(cid, **params, **({"norm": "geometric"} if cid == "mean_curv_pow" else {}))
        if flow.sign != "contracting" or not classify_flow(flow, region, 48).thm3_contracting_ok:
            continue
        ran += 1
        v = run_simulation(SimConfig(flow, n_core=33, t_max=0.02, monitor_every=2), initial).verdicts["thm3"]
        ok &= v.status == "pass"
        parts.append(f"{flow.describe()} {v.status}")
    v = run_simulation(SimConfig(MR_EXP, n_core=33, t_max=0.05, monitor_every=2), initial).verdicts["thm3"]
    ok &= v.status == "pass" and "expanding" in v.detail and ran > 0
    parts.append(f"{MR_EXP.describe()} expanding {v.status}")
    record(7, "psi monitors", ok, "; ".join(parts))


def test_08_certificate_special_cases():
    psi, s = cone_points(100, 8, psi_range=(1.0, 3.0), max_ratio=0.9)
    Hp = flow_from_expression("psi").jet(psi, s)
    Hs = flow_from_expression("s").jet(psi, s)
    worst = 0.0
    for cid, params in CANONICAL:
        spec = make_flow(cid, **params)
        K = spec.jet(psi, s)
        for H, wantA, wantB in ((spec.scaled(-1.0).jet(psi, s), 0 * psi, 0 * psi),
                                (Hp, K.K01 + s * K.K02, 0 * psi),
                                (Hs, -K.K10, -s * K.K20)):
            A, B = certificate_terms(H, K, s)[:2]
            worst = max(worst, float(np.abs(A - wantA).max()), float(np.abs(B - wantB).max()))
    record(8, "certificate special cases", worst < 1e-12, f"worst abs err {worst:.1e} (tol 1e-12)")


def test_09_soliton_detection():
    sphere = max(soliton_residual(SupportField.sphere(1.0, 33), make_flow(cid, **params)).max_residual
                 for cid, params in CATALOG_CASES)
    a = soliton_residual(perturbed_sphere(33, 0.05), MCF).max_residual
    b = soliton_residual(perturbed_sphere(65, 0.05), MCF).max_residual
    ok = sphere < 1e-8 and a > 1e-3 and b > 1e-3 and abs(b - a) <= 0.05 * a
    record(9, "soliton residual", ok, f"spheres {sphere:.1e} (<1e-8); perturbed N=33 {a:.3e}, N=65 {b:.3e}")


def test_10_parser_ad_equivalence():
    psi, s = cone_points(100, 10)
    worst, where = 0.0, ""
    for cid, params in CANONICAL:
        ad = flow_from_expression(catalog_expression(cid, params)).jet(psi, s)
        ref = make_flow(cid, **params).jet(psi, s)
        for name, x, y in zip(CELLS, ad.as_tuple(), ref.as_tuple()):
            x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
            # cells that vanish identically (K11 of mean_radius_pow) are compared absolutely
            scale = np.where(y == 0, 1.0, np.abs(y))
            err = float(np.max(np.abs(x - y) / scale))
            if err > worst:
                worst, where = err, f"{cid}.{name}"
    record(10, "expression AD vs catalog jets", worst < 1e-10, f"worst rel err {worst:.1e} at {where} (tol 1e-10)")


def test_11_rocflow_consistency():
    parts, ok = [], True
    for flow in (MCF, GAUSS, BLOORE):
        rep = rocflow_consistency(perturbed_sphere(65, 0.05), flow)
        ok &= rep.rel_err < 5e-3
        parts.append(f"{flow.name} {rep.rel_err:.1e}")
    record(11, "RoC evolution consistency (N=65)", ok, ", ".join(parts) + " (tol 5e-3)")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
