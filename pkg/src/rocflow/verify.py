"""Self-checks of the curvature-function machinery.

Each suite returns a :class:`SuiteResult` naming its worst cell, so a
broken formula is reported by flow, parameter set and derivative.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .expr import Jet2, catalog_expression, evaluate, flow_from_expression, parse_flow_expression
from .flows import FlowSpec, hessian_column, make_flow, parabolicity
from .ode import certificate_terms

# (catalog id, params) pairs exercised by every suite
CATALOG_CASES = [
    ("mean_curv_pow", {"n": 1.0}),
    ("mean_curv_pow", {"n": 2.0}),
    ("mean_curv_pow", {"n": -1.0}),
    ("gauss_curv_pow", {"n": 1.0}),
    ("gauss_curv_pow", {"n": 0.5}),
    ("mean_radius_pow", {"n": 1.0}),
    ("mean_radius_pow", {"n": -1.0}),
    ("linear_weingarten", {"a": 1.0, "b": 2.0, "c": 1.0}),
    ("linear_weingarten", {"a": 0.5, "b": 1.0, "c": 3.0}),
]

FD_FIRST_TOL = 1e-6
FD_SECOND_TOL = 1e-5
HESS_TOL = 1e-10
AD_TOL = 1e-10
NOTE1_TOL = 1e-8
CERT_TOL = 1e-12

CELLS = ("K", "K10", "K01", "K20", "K11", "K02")


@dataclass
class SuiteResult:
    name: str
    passed: bool
    worst: float
    tol: float
    cell: str  # flow/params/entry of the worst deviation
    failures: list = field(default_factory=list)

    def as_dict(self):
        return {"suite": self.name, "passed": bool(self.passed), "worst_rel_err": float(self.worst),
                "tol": self.tol, "worst_cell": self.cell, "failing_cells": list(self.failures)}

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f"; failing: {', '.join(self.failures)}" if self.failures else ""
        return f"{status} {self.name}: worst {self.worst:.3e} (tol {self.tol:.0e}) at {self.cell}{extra}"


def cone_points(n: int = 100, seed: int = 12345, psi_range=(0.5, 3.0), max_ratio: float = 0.95):
    """Random points with psi in ``psi_range`` and 0 <= s < max_ratio * psi."""
    rng = np.random.default_rng(seed)
    psi = rng.uniform(*psi_range, n)
    s = rng.uniform(0.0, max_ratio, n) * psi
    return psi, s


def rel_err(approx, exact, floor: float = 0.0):
    approx = np.asarray(approx, dtype=float)
    exact = np.asarray(exact, dtype=float)
    den = np.maximum(np.abs(exact), floor)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(den > 0, np.abs(approx - exact) / np.where(den > 0, den, 1.0), np.abs(approx - exact))
    return np.broadcast_to(r, np.broadcast(approx, exact).shape)


def _label(cid, params):
    return f"{cid}(" + ",".join(f"{k}={v:g}" for k, v in params.items()) + ")"


def _cases(cases):
    for item in cases or CATALOG_CASES:
        if isinstance(item, FlowSpec):
            yield item.describe(), item.name, item.params, item
        else:
            cid, params = item
            yield _label(cid, params), cid, params, make_flow(cid, **params)


class _Worst:
    def __init__(self, tol):
        self.tol = tol
        self.worst = 0.0
        self.cell = "-"
        self.failures = []

    def add(self, label: str, errs):
        e = float(np.max(errs)) if np.size(errs) else 0.0
        if not np.isfinite(e):
            e = np.inf
        if e > self.worst or self.cell == "-":
            self.worst, self.cell = e, label
        if not e <= self.tol:
            self.failures.append(label)

    def result(self, name):
        return SuiteResult(name, not self.failures, self.worst, self.tol, self.cell, self.failures)


def _fd_step(psi, s):
    return 1e-5 * np.maximum(1.0, np.maximum(np.abs(psi), np.abs(s)))


def check_tables_fd(cases=None, n: int = 100, seed: int = 12345):
    """Closed-form partials against central differences (two suites)."""
    psi, s = cone_points(n, seed)
    h = _fd_step(psi, s)
    first, second = _Worst(FD_FIRST_TOL), _Worst(FD_SECOND_TOL)
    for label, cid, params, spec in _cases(cases):
        j = spec.jet(psi, s)
        jp, jm = spec.jet(psi + h, s), spec.jet(psi - h, s)
        sp_, sm = spec.jet(psi, s + h), spec.jet(psi, s - h)
        first.add(f"{label}.K10", rel_err((jp.K - jm.K) / (2 * h), j.K10))
        first.add(f"{label}.K01", rel_err((sp_.K - sm.K) / (2 * h), j.K01))
        second.add(f"{label}.K20", rel_err((jp.K10 - jm.K10) / (2 * h), j.K20))
        second.add(f"{label}.K11", rel_err((sp_.K10 - sm.K10) / (2 * h), j.K11))
        second.add(f"{label}.K02", rel_err((sp_.K01 - sm.K01) / (2 * h), j.K02))
    return first.result("table_first_derivatives"), second.result("table_second_derivatives")


def check_hessian_column(cases=None, n: int = 100, seed: int = 12346):
    psi, s = cone_points(n, seed)
    acc = _Worst(HESS_TOL)
    for label, cid, params, spec in _cases(cases):
        j = spec.jet(psi, s)
        det = j.K20 * j.K02 - j.K11 * j.K11
        col = hessian_column(cid, params, psi, s)
        # scale by the size of the minors so cancellation to ~0 is judged fairly
        scale = np.abs(j.K20 * j.K02) + j.K11 * j.K11
        col = np.broadcast_to(col, det.shape)
        den = np.where(col != 0, np.abs(col), np.maximum(scale, 1e-300))
        acc.add(f"{label}.|Hess K|", np.abs(det - col) / den)
    return acc.result("hessian_column")


# cells as they appear in the printed derivative tables, where they differ
def printed_cells(cid, params, psi, s):
    D = psi * psi - s * s
    out = {}
    if cid == "gauss_curv_pow":
        n = params["n"]
        out["K11"] = -4 * abs(n) * (n + 1) * s / D ** (n + 2)
    if cid == "linear_weingarten":
        b, c = params["b"], params["c"]
        out["|Hess K|"] = 4 * (4 * b * b * D + 8 * b * c * psi * s + 3 * c * c) / D**4
    return out


def audit_printed_tables(n: int = 100, seed: int = 12347):
    """Deviation of the printed table cells from exact differentiation.

    Informational: returns {cell label: worst relative deviation}.
    """
    psi, s = cone_points(n, seed)
    s = np.maximum(s, 0.05 * psi)  # keep s away from 0 where both forms vanish
    out = {}
    for label, cid, params, spec in _cases(None):
        j = spec.jet(psi, s)
        exact = {"K11": j.K11, "|Hess K|": j.K20 * j.K02 - j.K11 * j.K11}
        for key, val in printed_cells(cid, params, psi, s).items():
            out[f"{label}.{key}"] = float(np.max(rel_err(val, exact[key])))
    return out


def check_ad_vs_catalog(cases=None, n: int = 100, seed: int = 12348):
    """Expression-defined flows (second-order AD) against closed forms."""
    psi, s = cone_points(n, seed)
    acc = _Worst(AD_TOL)
    for label, cid, params, spec in _cases(cases):
        ad = flow_from_expression(catalog_expression(cid, params)).jet(psi, s)
        ref = spec.jet(psi, s)
        for name, a, b in zip(CELLS, ad.as_tuple(), ref.as_tuple()):
            acc.add(f"{label}.{name}", _order_rel(name, a, b, ref))
    return acc.result("ad_vs_catalog")


def _order_rel(name, a, b, ref):
    """Relative error against the size of the same-order block.

    A single entry can cancel to nearly zero (K11 ~ s^3 for some negative
    powers) while its neighbours stay O(1); dividing by the block size
    keeps the comparison meaningful there.
    """
    if name == "K":
        scale = np.abs(ref.K)
    elif name in ("K10", "K01"):
        scale = np.maximum(np.abs(ref.K10), np.abs(ref.K01))
    else:
        scale = np.maximum(np.maximum(np.abs(ref.K20), np.abs(ref.K11)), np.abs(ref.K02))
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return np.abs(a - b) / np.maximum(scale, 1e-300)


def note1_sides(cid, params, lam1, lam2):
    """Both sides of dK/dlam1 * dK/dlam2 = 1/4 D^2 (K10^2 - K01^2).

    ``lam1 <= lam2`` are principal curvatures (r1 >= r2).  The left side is
    obtained by AD through psi = (r1 + r2)/2, s = (r1 - r2)/2.
    """
    ast = parse_flow_expression(catalog_expression(cid, params))
    L1, L2 = Jet2.var_psi(lam1), Jet2.var_s(lam2)
    r1, r2 = 1.0 / L1, 1.0 / L2
    K = evaluate(ast, {"psi": 0.5 * (r1 + r2), "s": 0.5 * (r1 - r2)})
    lhs = K.dp * K.ds
    r1v, r2v = 1.0 / lam1, 1.0 / lam2
    psi, s = 0.5 * (r1v + r2v), 0.5 * (r1v - r2v)
    j = make_flow(cid, **params).jet(psi, s)
    D = psi * psi - s * s
    rhs = 0.25 * D * D * (j.K10**2 - j.K01**2)
    return lhs, rhs, 0.25 * D * (j.K10**2 - j.K01**2)


def check_note1(cases=None, n: int = 100, seed: int = 12349):
    rng = np.random.default_rng(seed)
    lam1 = rng.uniform(0.3, 3.0, n)
    lam2 = lam1 * rng.uniform(1.0, 4.0, n)
    acc = _Worst(NOTE1_TOL)
    for label, cid, params, spec in _cases(cases):
        lhs, rhs, _ = note1_sides(cid, params, lam1, lam2)
        acc.add(f"{label}.note1", rel_err(lhs, rhs))
    return acc.result("note1_identity")


def check_certificates(cases=None, n: int = 100, seed: int = 12350):
    """A, B, {H, I} for H = -K, psi, s against their reduced forms."""
    psi, s = cone_points(n, seed, psi_range=(1.0, 3.0), max_ratio=0.9)
    acc = _Worst(CERT_TOL)
    H_psi = flow_from_expression("psi").jet(psi, s)
    H_s = flow_from_expression("s").jet(psi, s)
    for label, cid, params, spec in _cases(cases):
        Kj = spec.jet(psi, s)
        negK = spec.scaled(-1.0).jet(psi, s)
        K = np.asarray(Kj.K)
        checks = []
        A, B, HI, HK, _ = certificate_terms(negK, Kj, s)
        checks += [("H=-K.A", A, 0 * psi), ("H=-K.B", B, 0 * psi), ("H=-K.{H,I}", HI, -K * Kj.K10)]
        A, B, HI, HK, _ = certificate_terms(H_psi, Kj, s)
        checks += [("H=psi.A", A, Kj.K01 + s * Kj.K02), ("H=psi.B", B, 0 * psi),
                   ("H=psi.{H,I}", HI, K + s * Kj.K01)]
        A, B, HI, HK, _ = certificate_terms(H_s, Kj, s)
        checks += [("H=s.A", A, -Kj.K10), ("H=s.B", B, -s * Kj.K20), ("H=s.{H,I}", HI, -s * Kj.K10)]
        for name, got, want in checks:
            acc.add(f"{label}.{name}", np.abs(np.asarray(got, float) - np.asarray(want, float)))
    return acc.result("certificate_special_cases")


def check_parabolic(cases=None, n: int = 100, seed: int = 12351):
    """Catalog flows are parabolic: -K10 - |K01| > 0 throughout the cone."""
    psi, s = cone_points(n, seed)
    acc = _Worst(0.0)
    for label, cid, params, spec in _cases(cases):
        m = np.asarray(parabolicity(spec.jet(psi, s)), dtype=float)
        acc.add(f"{label}.parabolic", np.maximum(-m, 0.0) + (m <= 0) * 1.0)
    return acc.result("parabolicity")


def run_verify(cases=None, n: int = 100) -> list:
    first, second = check_tables_fd(cases, n)
    return [
        first, second,
        check_hessian_column(cases, n),
        check_note1(cases, n),
        check_ad_vs_catalog(cases, n),
        check_certificates(cases, n),
        check_parabolic(cases, n),
    ]
