"""Curvature functions K(psi, s) on radii-of-curvature space, s = |sigma|.

Catalog flows (D = psi^2 - s^2, sign = +1 for n > 0 and -1 for n < 0):

    mean_curv_pow      K = sign * psi^n / D^n          (H^n)
    gauss_curv_pow     K = sign / D^n                  (K^n)
    mean_radius_pow    K = sign / psi^n
    linear_weingarten  K = a + (2 b psi + c) / D       (a + 2bH + cK)

Every flow returns a :class:`FlowJet` holding K and its partials up to
second order.  The closed forms agree with the usual derivative tables except
for two corrected cells (the Gauss-power K11 carries a factor psi, and the
linear Weingarten Hessian determinant has 8 b c psi, not 8 b c psi s); the
table audit in :mod:`rocflow.verify` checks both variants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import BadParams, OutOfDomain

CATALOG = ("mean_curv_pow", "gauss_curv_pow", "mean_radius_pow", "linear_weingarten")


@dataclass(frozen=True)
class FlowJet:
    """K and its ordered-subscript partials in (psi, s)."""

    K: object
    K10: object
    K01: object
    K20: object
    K11: object
    K02: object

    def scaled(self, c: float) -> "FlowJet":
        return FlowJet(*(c * v for v in self.as_tuple()))

    def as_tuple(self):
        return (self.K, self.K10, self.K01, self.K20, self.K11, self.K02)

    @property
    def hessian_det(self):
        return self.K20 * self.K02 - self.K11 * self.K11


JetFunc = Callable[[np.ndarray, np.ndarray], FlowJet]


@dataclass(frozen=True)
class FlowSpec:
    """A named curvature function.

    ``sign`` is ``"contracting"``, ``"expanding"`` or ``None`` when unknown
    (parsed expressions).  ``jet_fn`` accepts scalars or numpy arrays.
    """

    name: str
    params: dict
    sign: str | None
    jet_fn: JetFunc = field(repr=False, compare=False)
    flags: tuple = ()
    expr: str | None = None
    value_fn: Callable | None = field(default=None, repr=False, compare=False)

    def jet(self, psi, s) -> FlowJet:
        return self.jet_fn(psi, s)

    def __call__(self, psi, s):
        """K alone (cheaper than the full jet for catalog flows)."""
        if self.value_fn is not None:
            return self.value_fn(psi, s)
        return self.jet_fn(psi, s).K

    def scaled(self, c: float, name: str | None = None) -> "FlowSpec":
        sign = self.sign
        if c < 0 and sign is not None:
            sign = "expanding" if sign == "contracting" else "contracting"
        base = self.jet_fn
        value = self.value_fn
        return FlowSpec(name or f"{c:g}*{self.name}", dict(self.params), sign,
                        lambda p, s: base(p, s).scaled(c), self.flags, None,
                        None if value is None else (lambda p, s: c * value(p, s)))

    def describe(self) -> str:
        if self.expr is not None:
            return f"expr:{self.expr}"
        args = ",".join(f"{k}={v:g}" for k, v in sorted(self.params.items()))
        if "geometric" in self.flags:
            args += ",norm=geometric"
        return f"{self.name}({args})"

    @property
    def catalog_params(self) -> dict:
        """Keyword arguments that rebuild this flow through make_flow."""
        out = dict(self.params)
        if "geometric" in self.flags:
            out["norm"] = "geometric"
        return out


# --------------------------------------------------------------------------
# closed forms


def _mean_curv_pow(n: float, norm: str = "table") -> JetFunc:
    sg = 1.0 if n > 0 else -1.0
    an = abs(n)
    # H = (r1 + r2)/(r1 r2) = 2 psi/D; the table form psi^n/D^n omits 2^n
    g = 2.0**n if norm == "geometric" else 1.0

    def jet(p, s):
        return _mcp_table(p, s).scaled(g) if g != 1.0 else _mcp_table(p, s)

    def _mcp_table(p, s):
        p2, s2 = p * p, s * s
        D = p2 - s2
        K = sg * p**n / D**n
        K10 = -an * p ** (n - 1) * (p2 + s2) / D ** (n + 1)
        K01 = 2 * an * s * p**n / D ** (n + 1)
        K11 = -2 * an * s * p ** (n - 1) * ((n + 2) * p2 + n * s2) / D ** (n + 2)
        K20 = an * p ** (n - 2) * ((n + 1) * p2 * p2 + 2 * (n + 2) * p2 * s2 + (n - 1) * s2 * s2) / D ** (n + 2)
        K02 = 2 * an * p**n * (p2 + (2 * n + 1) * s2) / D ** (n + 2)
        return FlowJet(K, K10, K01, K20, K11, K02)

    return jet


def _gauss_curv_pow(n: float) -> JetFunc:
    sg = 1.0 if n > 0 else -1.0
    an = abs(n)

    def jet(p, s):
        p2, s2 = p * p, s * s
        D = p2 - s2
        K = sg / D**n
        K10 = -2 * an * p / D ** (n + 1)
        K01 = 2 * an * s / D ** (n + 1)
        K11 = -4 * an * (n + 1) * p * s / D ** (n + 2)
        K20 = 2 * an * ((2 * n + 1) * p2 + s2) / D ** (n + 2)
        K02 = 2 * an * (p2 + (2 * n + 1) * s2) / D ** (n + 2)
        return FlowJet(K, K10, K01, K20, K11, K02)

    return jet


def _mean_radius_pow(n: float) -> JetFunc:
    sg = 1.0 if n > 0 else -1.0
    an = abs(n)

    def jet(p, s):
        zero = 0.0 * s
        K = sg / p**n + zero
        K10 = -an / p ** (n + 1) + zero
        K20 = an * (n + 1) / p ** (n + 2) + zero
        return FlowJet(K, K10, zero, K20, zero, zero)

    return jet


def _linear_weingarten(a: float, b: float, c: float) -> JetFunc:
    def jet(p, s):
        p2, s2 = p * p, s * s
        D = p2 - s2
        K = a + (2 * b * p + c) / D
        K10 = -2 * (b * (p2 + s2) + c * p) / D**2
        K01 = 2 * s * (c + 2 * b * p) / D**2
        K11 = -4 * s * (b * (3 * p2 + s2) + 2 * c * p) / D**3
        K20 = 2 * (2 * b * p * (p2 + 3 * s2) + c * (3 * p2 + s2)) / D**3
        K02 = 2 * (2 * b * p * (p2 + 3 * s2) + c * (p2 + 3 * s2)) / D**3
        return FlowJet(K, K10, K01, K20, K11, K02)

    return jet


def hessian_column(catalog_id: str, params: dict, p, s):
    """Closed-form Hessian determinant K20*K02 - K11^2 for a catalog flow."""
    D = p * p - s * s
    if catalog_id == "mean_curv_pow":
        n = params["n"]
        return 2 * n * n * (n + 1) * p ** (2 * n - 2) / D ** (2 * n + 1)
    if catalog_id == "gauss_curv_pow":
        n = params["n"]
        return 4 * n * n * (2 * n + 1) / D ** (2 * n + 2)
    if catalog_id == "mean_radius_pow":
        return 0.0 * p
    if catalog_id == "linear_weingarten":
        b, c = params["b"], params["c"]
        return 4 * (4 * b * b * D + 8 * b * c * p + 3 * c * c) / D**4
    raise BadParams(f"unknown catalog flow {catalog_id!r}")


def make_flow(catalog_id: str, **params) -> FlowSpec:
    """Build a catalog flow.

    Power flows take ``n`` (non-zero); ``linear_weingarten`` takes positive
    ``a``, ``b``, ``c`` and is flagged ``bloore`` when ``a == 1`` and
    ``b^2 > c``.  ``mean_curv_pow`` also accepts ``norm="geometric"`` for
    K = (2 psi/D)^n, the power of H = 1/r1 + 1/r2 (unit sphere speed 2).
    """
    if catalog_id in ("mean_curv_pow", "gauss_curv_pow", "mean_radius_pow"):
        params = dict(params)
        norm = params.pop("norm", "table") if catalog_id == "mean_curv_pow" else "table"
        if norm not in ("table", "geometric"):
            raise BadParams(f"norm must be 'table' or 'geometric', got {norm!r}")
        extra = set(params) - {"n"}
        if extra or "n" not in params:
            raise BadParams(f"{catalog_id} takes exactly one parameter n")
        n = float(params["n"])
        if n == 0 or not math.isfinite(n):
            raise BadParams(f"{catalog_id} needs n != 0, got n={n}")
        sign = "contracting" if n > 0 else "expanding"
        sg = 1.0 if n > 0 else -1.0
        if catalog_id == "mean_curv_pow":
            flags = ("geometric",) if norm == "geometric" else ()
            g = 2.0 if norm == "geometric" else 1.0
            value = lambda p, s: sg * (g * p / (p * p - s * s)) ** n
            return FlowSpec(catalog_id, {"n": n}, sign, _mean_curv_pow(n, norm), flags, None, value)
        if catalog_id == "gauss_curv_pow":
            value = lambda p, s: sg / (p * p - s * s) ** n
            return FlowSpec(catalog_id, {"n": n}, sign, _gauss_curv_pow(n), (), None, value)
        value = lambda p, s: sg / p**n + 0.0 * s
        return FlowSpec(catalog_id, {"n": n}, sign, _mean_radius_pow(n), (), None, value)
    if catalog_id == "linear_weingarten":
        if set(params) != {"a", "b", "c"}:
            raise BadParams("linear_weingarten takes parameters a, b, c")
        a, b, c = (float(params[k]) for k in "abc")
        if min(a, b, c) <= 0:
            raise BadParams(f"linear_weingarten needs a, b, c > 0, got {a}, {b}, {c}")
        flags = ("bloore",) if a == 1.0 and b * b > c > 0 else ()
        value = lambda p, s: a + (2 * b * p + c) / (p * p - s * s)
        return FlowSpec(catalog_id, {"a": a, "b": b, "c": c}, "contracting",
                        _linear_weingarten(a, b, c), flags, None, value)
    raise BadParams(f"unknown catalog flow {catalog_id!r}; choose from {', '.join(CATALOG)}")


def check_cone(psi, s) -> None:
    psi = np.asarray(psi, dtype=float)
    s = np.asarray(s, dtype=float)
    if not (np.all(psi > s) and np.all(s >= 0)):
        raise OutOfDomain("point(s) outside the convex cone psi > s >= 0")


def eval_jet(spec: FlowSpec, psi, s) -> FlowJet:
    """Jet of ``spec`` at (psi, s); raises OutOfDomain off the open cone."""
    check_cone(psi, s)
    return spec.jet(psi, s)


def parabolicity(jet: FlowJet):
    """Margin -K10 - |K01|; positive exactly where the flow is parabolic."""
    return -jet.K10 - np.abs(jet.K01)


# --------------------------------------------------------------------------
# classification


@dataclass
class Condition:
    ok: bool
    worst: float
    at: tuple

    def as_dict(self):
        return {"ok": bool(self.ok), "worst_margin": float(self.worst), "at": [float(v) for v in self.at]}


@dataclass
class FlowReport:
    flow: str
    region: tuple
    samples: int
    parabolic: Condition
    convex: Condition
    concave: Condition
    thm3_contracting: Condition
    thm3_expanding: Condition
    thm4: Condition
    epsilon: float
    notes: list

    @property
    def thm3_contracting_ok(self) -> bool:
        return self.parabolic.ok and self.thm3_contracting.ok

    @property
    def thm3_expanding_ok(self) -> bool:
        return self.parabolic.ok and self.thm3_expanding.ok

    def thm4_ok(self, eps: float = 0.0) -> bool:
        return self.parabolic.ok and self.thm4.ok and self.epsilon > eps

    def as_dict(self):
        out = {"flow": self.flow, "region": [list(map(float, r)) for r in self.region], "samples": self.samples}
        for k in ("parabolic", "convex", "concave", "thm3_contracting", "thm3_expanding", "thm4"):
            out[k] = getattr(self, k).as_dict()
        out["epsilon"] = float(self.epsilon)
        out["notes"] = list(self.notes)
        return out


def cone_samples(region, samples: int):
    """Regular ``samples x samples`` grid over ``region`` clipped to psi > s.

    ``region`` is ``((psi_lo, psi_hi), (s_lo, s_hi))``; ``s_hi`` may be a
    callable of psi, e.g. ``lambda p: 0.9 * p``.
    """
    (p_lo, p_hi), (s_lo, s_hi) = region
    if p_lo <= 0 or p_hi < p_lo or s_lo < 0:
        raise OutOfDomain(f"region {region!r} is not inside the cone")
    p = np.linspace(p_lo, p_hi, samples)
    u = np.linspace(0.0, 1.0, samples)
    P, U = np.meshgrid(p, u, indexing="ij")
    top = s_hi(P) if callable(s_hi) else np.full_like(P, float(s_hi))
    S = s_lo + U * (top - s_lo)
    keep = (P > S) & (S >= 0)
    if not keep.any():
        raise OutOfDomain(f"region {region!r} has no points with psi > s")
    return P[keep], S[keep]


def _condition(margin, P, S, strict=False) -> Condition:
    k = int(np.argmin(margin))
    worst = float(margin[k])
    ok = worst > 0 if strict else worst >= -1e-12 * max(1.0, float(np.abs(margin).max()))
    return Condition(ok, worst, (float(P[k]), float(S[k])))


def classify_flow(spec: FlowSpec, region, samples: int = 64) -> FlowReport:
    """Evaluate parabolicity, convexity and the estimate hypotheses on a grid.

    Convexity means K20 >= 0 and K20*K02 - K11^2 >= 0 (concavity mirrors it).
    The Theorem-3 hypotheses are K + s K01 >= 0 and K01 + s K02 >= 0 (or both
    <= 0); Theorem 4 asks -K10 >= s |K20| with inf(-K10) reported as epsilon.
    """
    P, S = cone_samples(region, samples)
    j = eval_jet(spec, P, S)
    det = j.K20 * j.K02 - j.K11 * j.K11
    rng = lambda v: np.broadcast_to(v, P.shape)
    K, K01, K02, K20, K10 = (rng(v) for v in (j.K, j.K01, j.K02, j.K20, j.K10))
    par = _condition(parabolicity(j), P, S, strict=True)
    cvx = _condition(np.minimum(K20, det), P, S)
    ccv = _condition(np.minimum(-K20, det), P, S)
    m1 = K + S * K01
    m2 = K01 + S * K02
    t3c = _condition(np.minimum(m1, m2), P, S)
    t3e = _condition(np.minimum(-m1, -m2), P, S)
    t4 = _condition(-K10 - S * np.abs(K20), P, S)
    eps = float(np.min(-K10))
    notes = []
    if spec.name == "gauss_curv_pow":
        n = spec.params["n"]
        if -0.5 < n < 0.5 and cvx.ok:
            notes.append(
                f"gauss_curv_pow n={n:g}: sampled Hessian is positive semidefinite although "
                "the stated convexity range is n >= 1/2; |Hess K| = 4n^2(2n+1)/D^(2n+2) > 0 for all n > -1/2"
            )
    span = ((float(region[0][0]), float(region[0][1])), _region_s(region))
    return FlowReport(spec.describe(), span, int(P.size), par, cvx, ccv, t3c, t3e, t4, eps, notes)


def _region_s(region):
    lo, hi = region[1]
    return (float(lo), float("nan") if callable(hi) else float(hi))
