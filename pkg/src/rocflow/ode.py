"""The spatially homogeneous flow on radii-of-curvature space.

Dropping spatial derivatives from the (psi, |sigma|) evolution leaves

    dpsi/dt = -K - s K01,    ds/dt = s K10,

a Hamiltonian system in the canonical pair (psi, s) with Hamiltonian
I = s K.  Level sets of I are the flowlines.
"""

from __future__ import annotations

from dataclasses import dataclass

import contourpy
import numpy as np

from .errors import ConeExit, OutOfDomain
from .flows import FlowJet, FlowSpec, check_cone, cone_samples


@dataclass(frozen=True)
class RoCPoint:
    psi: float
    s: float

    def __post_init__(self):
        if not self.psi > self.s >= 0:
            raise OutOfDomain(f"({self.psi}, {self.s}) is outside the cone psi > s >= 0")

    def as_array(self) -> np.ndarray:
        return np.array([self.psi, self.s])


def ode_rhs(p, flow: FlowSpec):
    """(-K - s K01, s K10) at ``p`` (a RoCPoint or a (psi, s) pair)."""
    psi, s = (p.psi, p.s) if isinstance(p, RoCPoint) else p
    check_cone(psi, s)
    j = flow.jet(psi, s)
    return (-j.K - s * j.K01, s * j.K10)


def conserved(flow: FlowSpec, psi, s):
    """I = s K."""
    return s * flow(psi, s)


@dataclass
class OdePath:
    t: np.ndarray
    psi: np.ndarray
    s: np.ndarray
    invariant: np.ndarray
    drift: float  # max |I(t) - I(0)|
    stopped: str  # "t_span", "stop_condition" or "cone_exit"


def _rk4(f, y, dt):
    k1 = f(y)
    k2 = f(y + 0.5 * dt * k1)
    k3 = f(y + 0.5 * dt * k2)
    k4 = f(y + dt * k3)
    return y + dt * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0


def integrate_ode(p0, flow: FlowSpec, t_span: float, dt: float, stop=None,
                  raise_on_exit: bool = True) -> OdePath:
    """RK4 path from ``p0`` over ``t_span`` (negative runs backwards).

    ``stop(psi, s)`` may end the run early.  Leaving the cone raises
    :class:`ConeExit` carrying the last valid state and the path so far,
    unless ``raise_on_exit`` is false.
    """
    p0 = p0 if isinstance(p0, RoCPoint) else RoCPoint(*p0)
    if dt <= 0:
        raise ValueError("dt must be positive")
    direction = 1.0 if t_span >= 0 else -1.0
    n = int(np.ceil(abs(t_span) / dt - 1e-9))
    h = direction * dt

    def f(y):
        a, b = ode_rhs((y[0], y[1]), flow)
        return np.array([a, b], dtype=float)

    y = p0.as_array()
    ts, ys = [0.0], [y]
    stopped = "t_span"
    t = 0.0
    for k in range(n):
        step = h if k < n - 1 else direction * abs(t_span) - t
        try:
            y_new = _rk4(f, y, step)
            check_cone(y_new[0], y_new[1])
        except OutOfDomain:
            path = _path(ts, ys, flow, "cone_exit")
            if raise_on_exit:
                raise ConeExit(
                    f"path left the cone after t = {t:.6g}", last_state=(t, y[0], y[1]), path=path
                ) from None
            return path
        t += step
        y = y_new
        ts.append(t)
        ys.append(y)
        if stop is not None and stop(y[0], y[1]):
            stopped = "stop_condition"
            break
    return _path(ts, ys, flow, stopped)


def _path(ts, ys, flow, stopped) -> OdePath:
    arr = np.array(ys)
    inv = conserved(flow, arr[:, 0], arr[:, 1])
    return OdePath(np.array(ts), arr[:, 0], arr[:, 1], inv, float(np.abs(inv - inv[0]).max()), stopped)


def poisson_bracket(H: FlowJet, K: FlowJet):
    """{H, K} = H10 K01 - H01 K10."""
    return H.K10 * K.K01 - H.K01 * K.K10


# --------------------------------------------------------------------------
# flowlines


@dataclass
class Flowline:
    level: float
    points: np.ndarray  # (m, 2) columns psi, s, ordered along the flow
    degenerate: bool = False  # the I = 0 level (boundary s = 0)


def flowlines(flow: FlowSpec, region, levels=12, resolution: int = 200) -> list:
    """Level sets of I = s K traced by marching squares.

    ``levels`` is a count or an explicit sequence.  Each polyline is
    oriented so consecutive points follow the ODE direction.  Level 0 is
    reported as the degenerate boundary s = 0 over the psi range (plus any
    zero set of K met by the contouring).
    """
    (p_lo, p_hi), (s_lo, s_hi) = region
    ps = np.linspace(p_lo, p_hi, resolution)
    top = float(np.max(s_hi(ps))) if callable(s_hi) else float(s_hi)
    ss = np.linspace(s_lo, top, resolution)
    P, S = np.meshgrid(ps, ss)
    cap = s_hi(P) if callable(s_hi) else np.full_like(P, top)
    inside = (P > S) & (S <= cap)
    with np.errstate(all="ignore"):
        I = np.where(inside, conserved(flow, P, np.where(inside, S, 0.0)), np.nan)
    if np.isscalar(levels) or isinstance(levels, (int, np.integer)):
        finite = I[np.isfinite(I)]
        lo, hi = np.percentile(finite, [2, 98])
        vals = list(np.linspace(lo, hi, int(levels) + 2)[1:-1])
    else:
        vals = [float(v) for v in levels]
    gen = contourpy.contour_generator(ps, ss, np.ma.masked_invalid(I))
    out = []
    for lev in vals:
        if lev == 0.0:
            boundary = np.column_stack([ps, np.zeros_like(ps)])
            out.append(Flowline(0.0, _orient(boundary, flow), degenerate=True))
        for line in gen.lines(lev):
            if len(line) < 2:
                continue
            if lev == 0.0 and np.all(np.abs(line[:, 1]) < 1e-12):
                continue
            out.append(Flowline(float(lev), _orient(np.asarray(line), flow)))
    return out


def _orient(points: np.ndarray, flow: FlowSpec) -> np.ndarray:
    """Reverse the polyline if it runs against the ODE velocity."""
    mid = len(points) // 2
    a = points[max(mid - 1, 0)]
    b = points[min(mid + 1, len(points) - 1)]
    c = points[mid]
    if not c[0] > c[1] >= 0:
        return points
    try:
        v = np.array(ode_rhs((c[0], c[1]), flow), dtype=float)
    except OutOfDomain:
        return points
    return points if float(np.dot(b - a, v)) >= 0 else points[::-1].copy()


# --------------------------------------------------------------------------
# Main Theorem certificate


@dataclass
class CertificateReport:
    region: tuple
    psi: np.ndarray
    s: np.ndarray
    A: np.ndarray
    B: np.ndarray
    HI: np.ndarray  # {H, I}
    HK: np.ndarray  # {H, K}
    hess_K: np.ndarray
    worst_1: tuple  # (margin, psi, s) for A - |B| and {H, I} (sets 1a/2a)
    worst_2: tuple  # the same for -A - |B| and -{H, I} (sets 1b/2b)
    h10_zero: int  # samples where H10 vanishes (normalisation degenerates)

    @property
    def set1_ok(self) -> bool:
        return self.worst_1[0] >= 0

    @property
    def set2_ok(self) -> bool:
        return self.worst_2[0] >= 0


def certificate_terms(Hj: FlowJet, Kj: FlowJet, s, K=None):
    """A, B, {H, I}, {H, K} and Hess_K(dH) from the two jets."""
    H10, H01 = Hj.K10, Hj.K01
    HK = H10 * Kj.K01 - H01 * Kj.K10
    hess_K = Kj.K20 * H01**2 - 2 * Kj.K11 * H01 * H10 + Kj.K02 * H10**2
    hess_H = Hj.K20 * H01**2 - 2 * Hj.K11 * H01 * H10 + Hj.K02 * H10**2
    A = (H10**2 + H01**2) * HK - s * (Kj.K10 * hess_H - H10 * hess_K)
    B = -2 * H10 * H01 * HK + s * (Kj.K01 * hess_H - H01 * hess_K)
    HI = H10 * Kj.K + s * HK
    return A, B, HI, HK, hess_K


def certificate_check(H: FlowSpec, K: FlowSpec, region, samples: int = 64) -> CertificateReport:
    """Evaluate the certificate quantities on a sample grid of ``region``."""
    P, S = cone_samples(region, samples)
    Hj = H.jet(P, S)
    Kj = K.jet(P, S)
    bc = lambda j: type(j)(*(np.broadcast_to(np.asarray(v, dtype=float), P.shape) for v in j.as_tuple()))
    Hj, Kj = bc(Hj), bc(Kj)
    A, B, HI, HK, hess_K = certificate_terms(Hj, Kj, S)
    m1 = np.minimum(A - np.abs(B), HI)
    m2 = np.minimum(-A - np.abs(B), -HI)
    k1, k2 = int(np.argmin(m1)), int(np.argmin(m2))
    h10_zero = int(np.sum(np.abs(Hj.K10) <= 1e-14 * (1 + np.abs(Hj.K01))))
    return CertificateReport(
        region, P, S, A, B, HI, HK, hess_K,
        (float(m1[k1]), float(P[k1]), float(S[k1])),
        (float(m2[k2]), float(P[k2]), float(S[k2])),
        h10_zero,
    )
