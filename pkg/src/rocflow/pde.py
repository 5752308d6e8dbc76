"""Support-function evolution dr/dt = -K(psi, |sigma|) and its monitors.

The state is the support function on two charts.  Interior nodes are
advanced with classical RK4; fringe nodes are refilled from the other chart
after every stage, so the overlap stays consistent to interpolation order.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import grid as G
from .errors import ConfigError, NonConvex, NotParabolic, OutOfDomain
from .flows import FlowSpec, check_cone, classify_flow, parabolicity
from .geometry import RoCField, _abs_sigma_derivs, compute_roc
from .grid import NORTH, SOUTH, ChartPair, SupportField, chart_grid

log = logging.getLogger(__name__)

VERDICT_RTOL = 1e-3


@dataclass(frozen=True)
class SimConfig:
    flow: FlowSpec
    n_core: int = 65
    cfl: float = 0.2
    t_max: float = 0.1
    min_convexity: float = 0.0  # stop when min(psi - |sigma|) drops to this
    min_psi_frac: float = 0.05  # stop when min psi falls below this share of its initial value
    converge_tol: float | None = None  # stop when max|sigma| / mean psi is below this
    monitor_every: int = 1
    snapshot_every: int = 0  # 0 keeps only first and last states
    max_steps: int = 2_000_000

    def __post_init__(self):
        if self.n_core < 33 or self.n_core % 2 == 0:
            raise ConfigError(f"grid size must be odd and >= 33, got {self.n_core}")
        if not 0 < self.cfl <= 0.5:
            raise ConfigError(f"cfl factor must lie in (0, 0.5], got {self.cfl}")
        if not self.t_max > 0:
            raise ConfigError(f"t_max must be positive, got {self.t_max}")
        if not 0 <= self.min_psi_frac < 1:
            raise ConfigError(f"min_psi_frac must lie in [0, 1), got {self.min_psi_frac}")
        if self.monitor_every < 1:
            raise ConfigError("monitor_every must be >= 1")


# --------------------------------------------------------------------------
# right-hand side and stepping


def _interior_jet(roc: RoCField, flow: FlowSpec):
    g = roc.geometry
    m = g.interior
    psi, s = roc.interior_samples()
    check_cone(psi, s)
    jet = flow.jet(psi, s)
    return g, m, psi, s, jet


def _split(values: np.ndarray, g: G.ChartGeometry) -> ChartPair:
    """Scatter concatenated interior values back onto two chart arrays."""
    m = g.interior
    k = int(m.sum())
    out = []
    for i, cid in enumerate(G.CHARTS):
        arr = np.full((g.size, g.size), np.nan)
        arr[m] = values[i * k:(i + 1) * k]
        out.append(chart_grid(cid, arr))
    return ChartPair(*out)


def pde_rhs(field: SupportField, flow: FlowSpec, roc: RoCField | None = None) -> ChartPair:
    """-K(psi, |sigma|) at interior nodes (NaN on the fringe)."""
    roc = roc or compute_roc(field, check=False)
    if not roc.convex:
        raise NonConvex(f"psi - |sigma| reaches {roc.convexity_margin:.3e}", roc.convexity_margin)
    psi, s = roc.interior_samples()
    check_cone(psi, s)
    k = np.broadcast_to(np.asarray(flow(psi, s), dtype=float), psi.shape)
    return _split(-k, roc.geometry)


def adaptive_dt(field: SupportField, flow: FlowSpec, cfl: float = 0.2, roc: RoCField | None = None) -> float:
    """Explicit step c h^2 / max(1/2 w^2 (-K10 + |K01|)) over interior nodes."""
    roc = roc or compute_roc(field, check=False)
    g, m, psi, s, jet = _interior_jet(roc, flow)
    margin = np.broadcast_to(parabolicity(jet), psi.shape)
    if not np.all(margin > 0):
        k = int(np.argmin(margin))
        raise NotParabolic(
            f"-K10 <= |K01| at (psi, s) = ({psi[k]:.4g}, {s[k]:.4g}); explicit step undefined"
        )
    w = np.concatenate([g.w[m], g.w[m]])
    coef = 0.5 * w * w * (-np.asarray(jet.K10) + np.abs(jet.K01))
    return float(cfl * g.h**2 / np.max(coef))


def _stage(north: np.ndarray, south: np.ndarray, t: float, flow: FlowSpec):
    f = SupportField.from_arrays(north, south, t=t, recenter=False, check=False)
    rhs = pde_rhs(f, flow)
    return rhs.north.values, rhs.south.values


def advance(field: SupportField, flow: FlowSpec, dt: float) -> SupportField:
    """One RK4 step of dr/dt = -K; fringe nodes refilled after every stage."""
    if dt == 0:
        return field
    g = field.geometry
    m = g.interior
    n0, s0 = (a.copy() for a in field.arrays())

    def combine(kn, ks, c):
        n, s = n0.copy(), s0.copy()
        n[m] += c * kn[m]
        s[m] += c * ks[m]
        G.fill_fringe(n, s, g)
        return n, s

    k1 = _stage(n0, s0, field.t, flow)
    k2 = _stage(*combine(*k1, 0.5 * dt), field.t + 0.5 * dt, flow)
    k3 = _stage(*combine(*k2, 0.5 * dt), field.t + 0.5 * dt, flow)
    k4 = _stage(*combine(*k3, dt), field.t + dt, flow)
    kn = (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]) / 6.0
    ks = (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]) / 6.0
    n, s = combine(kn, ks, dt)
    return field.with_arrays(n, s, t=field.t + dt)


# --------------------------------------------------------------------------
# monitors


MONITOR_COLUMNS = ("t", "min_abs_K", "max_psi", "min_psi", "max_sigma", "min_convexity",
                   "parab_margin_max", "parab_margin_min", "epsilon")


@dataclass
class MonitorSeries:
    rows: list = field(default_factory=list)

    def append(self, row: dict) -> None:
        if self.rows and not row["t"] > self.rows[-1]["t"]:
            raise ValueError("monitor times must be strictly increasing")
        self.rows.append(row)

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows], dtype=float)

    def __len__(self):
        return len(self.rows)

    def as_array(self) -> np.ndarray:
        return np.array([[r[c] for c in MONITOR_COLUMNS] for r in self.rows], dtype=float)


def monitor_row(roc: RoCField, flow: FlowSpec, eps_prev: float = math.inf) -> dict:
    _, _, psi, s, jet = _interior_jet(roc, flow)
    K = np.broadcast_to(np.asarray(jet.K, dtype=float), psi.shape)
    K10 = np.broadcast_to(np.asarray(jet.K10, dtype=float), psi.shape)
    margin = np.broadcast_to(parabolicity(jet), psi.shape)
    return {
        "t": float(roc.t),
        "min_abs_K": float(np.abs(K).min()),
        "max_psi": float(psi.max()),
        "min_psi": float(psi.min()),
        "max_sigma": float(s.max()),
        "min_convexity": float((psi - s).min()),
        "parab_margin_max": float(margin.max()),
        "parab_margin_min": float(margin.min()),
        "epsilon": float(min(eps_prev, (-K10).min())),
    }


# --------------------------------------------------------------------------
# verdicts


@dataclass
class Verdict:
    name: str
    status: str  # pass | fail | not_applicable
    detail: str
    worst_violation: float = 0.0
    at_t: float | None = None

    def as_dict(self):
        return {"status": self.status, "detail": self.detail,
                "worst_violation": float(self.worst_violation), "at_t": self.at_t}


def _monotone(values: np.ndarray, t: np.ndarray, increasing: bool, rtol: float):
    """Largest breach of monotonicity, relative to |values[0]|.

    Returns (worst relative breach, time of breach).
    """
    if len(values) < 2:
        return 0.0, None
    scale = max(abs(values[0]), 1e-300)
    if increasing:
        running = np.maximum.accumulate(values)
        breach = (running[:-1] - values[1:]) / scale
    else:
        running = np.minimum.accumulate(values)
        breach = (values[1:] - running[:-1]) / scale
    k = int(np.argmax(breach))
    return float(breach[k]), float(t[k + 1])


def _hypothesis_region(roc: RoCField):
    psi, s = roc.interior_samples()
    lo, hi = float(psi.min()), float(psi.max())
    smax = float(s.max())
    return ((lo, hi), (0.0, lambda p: np.minimum(smax, 0.999 * p)))


def theorem_verdicts(series: MonitorSeries, flow: FlowSpec, initial_roc: RoCField,
                     rtol: float = VERDICT_RTOL) -> dict:
    """Thm2, Thm3 and Thm4 verdicts for a recorded run."""
    t = series.column("t")
    out = {}
    report = classify_flow(flow, _hypothesis_region(initial_roc), samples=48)
    parabolic_run = bool(np.all(series.column("parab_margin_min") > 0))

    if parabolic_run:
        worst, at = _monotone(series.column("min_abs_K"), t, True, rtol)
        status = "pass" if worst <= rtol else "fail"
        out["thm2"] = Verdict("thm2", status, "min|K| nondecreasing", max(worst, 0.0), at)
    else:
        out["thm2"] = Verdict("thm2", "not_applicable", "flow left the parabolic region")

    contracting = flow.sign == "contracting" or (flow.sign is None and series.rows[0]["min_abs_K"] >= 0
                                                 and report.thm3_contracting_ok)
    if contracting and report.thm3_contracting_ok:
        worst, at = _monotone(series.column("max_psi"), t, False, rtol)
        status = "pass" if worst <= rtol else "fail"
        out["thm3"] = Verdict("thm3", status, "max psi nonincreasing (contracting branch)", max(worst, 0.0), at)
    elif not contracting and report.thm3_expanding_ok:
        worst, at = _monotone(series.column("min_psi"), t, True, rtol)
        status = "pass" if worst <= rtol else "fail"
        # for expanding flows the bound runs the other way: psi(t) >= min psi(0)
        out["thm3"] = Verdict("thm3", status, "min psi nondecreasing (expanding branch, psi(t) >= min psi(0))",
                              max(worst, 0.0), at)
    else:
        out["thm3"] = Verdict("thm3", "not_applicable", "hypotheses K + sK01, K01 + sK02 fail on the initial range")

    if report.thm4_ok(0.0) and parabolic_run:
        eps = series.column("epsilon")
        decay = series.column("max_sigma") * np.exp(eps * t)
        worst, at = _monotone(decay, t, False, rtol)
        status = "pass" if worst <= rtol else "fail"
        out["thm4"] = Verdict("thm4", status, "max|sigma| exp(eps t) nonincreasing", max(worst, 0.0), at)
    else:
        out["thm4"] = Verdict("thm4", "not_applicable", "-K10 >= s|K20| or -K10 > 0 fails on the initial range")
    return out


# --------------------------------------------------------------------------
# driver


@dataclass
class SimResult:
    final: SupportField
    monitors: MonitorSeries
    verdicts: dict
    reason: str
    steps: int
    snapshots: list  # SupportField states
    message: str = ""


def _converged(row: dict, roc: RoCField, tol: float | None) -> bool:
    return tol is not None and row["max_sigma"] <= tol * abs(roc.mean_psi)


def run_simulation(config: SimConfig, initial: SupportField, progress=None) -> SimResult:
    """Advance ``initial`` until ``t_max`` or a stop margin triggers.

    Never returns a state with psi - |sigma| <= 0: a step that loses
    convexity is discarded and the run stops with ``ConvexityLost``.
    """
    flow = config.flow
    state = initial
    roc = compute_roc(state)
    roc0 = roc
    series = MonitorSeries()
    row = monitor_row(roc, flow)
    series.append(row)
    eps = row["epsilon"]
    psi_floor = abs(row["min_psi"])
    snaps = [state]
    reason, message = "TMaxReached", ""
    steps = 0
    while state.t < config.t_max:
        if steps >= config.max_steps:
            reason, message = "TMaxReached", f"step limit {config.max_steps} reached"
            break
        try:
            dt = adaptive_dt(state, flow, config.cfl, roc)
        except NotParabolic as exc:
            reason, message = "DomainExit", str(exc)
            break
        except OutOfDomain as exc:
            reason, message = "DomainExit", str(exc)
            break
        if dt <= 1e-13 * max(state.t, config.t_max):
            reason, message = "DomainExit", f"time step {dt:.3e} underflows at t = {state.t:.6g}"
            break
        remaining = config.t_max - state.t
        last = dt >= remaining * (1 - 1e-9)
        dt = remaining if last else dt
        try:
            nxt = advance(state, flow, dt)
            if last:
                nxt = nxt.with_arrays(*nxt.arrays(), t=config.t_max)
            nroc = compute_roc(nxt, check=False)
        except OutOfDomain as exc:
            reason, message = "DomainExit", str(exc)
            break
        except NonConvex as exc:
            reason, message = "ConvexityLost", str(exc)
            break
        if not np.isfinite(nroc.convexity_margin) or nroc.convexity_margin <= config.min_convexity:
            reason = "ConvexityLost"
            message = f"min(psi - |sigma|) = {nroc.convexity_margin:.3e} at t = {nxt.t:.6g}"
            break
        state, roc = nxt, nroc
        steps += 1
        if steps % config.monitor_every == 0 or last:
            try:
                row = monitor_row(roc, flow, eps)
            except OutOfDomain as exc:
                reason, message = "DomainExit", str(exc)
                break
            eps = row["epsilon"]
            series.append(row)
            if progress is not None:
                progress(row)
            if row["min_psi"] <= config.min_psi_frac * psi_floor:
                reason, message = "DomainExit", f"min psi {row['min_psi']:.3e} below stop margin (pinch-off)"
                break
            if _converged(row, roc, config.converge_tol):
                reason = "Converged"
                break
        if config.snapshot_every and steps % config.snapshot_every == 0:
            snaps.append(state)
    if series.rows[-1]["t"] < state.t:
        series.append(monitor_row(roc, flow, eps))
    if snaps[-1] is not state:
        snaps.append(state)
    verdicts = theorem_verdicts(series, flow, roc0)
    log.info("run stopped: %s after %d steps at t=%.6g", reason, steps, state.t)
    return SimResult(state, series, verdicts, reason, steps, snaps, message)


def sphere_radius_ode(flow: FlowSpec, r0: float, t_end: float, steps: int = 4000) -> float:
    """RK4 for dR/dt = -K(R, 0), the radius law of round spheres."""
    if t_end == 0:
        return r0
    dt = t_end / steps
    f = lambda r: -float(flow.jet(r, 0.0).K)
    r = r0
    for _ in range(steps):
        k1 = f(r)
        k2 = f(r + 0.5 * dt * k1)
        k3 = f(r + 0.5 * dt * k2)
        k4 = f(r + dt * k3)
        r += dt * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
    return r


def mean_radius(field: SupportField) -> float:
    g = field.geometry
    return G.sphere_integral(*field.arrays(), g) / (4.0 * math.pi)


# --------------------------------------------------------------------------
# evolution of (psi, |sigma|)


@dataclass(frozen=True)
class RoCRates:
    """d psi/dt and d|sigma|/dt on both charts; NaN outside ``mask``."""

    dpsi: ChartPair
    dsigma: ChartPair
    mask: ChartPair  # boolean arrays


def _complex_derivs(f: np.ndarray, h: float):
    fx, fy, fxx, fyy, fxy = G.wirtinger(f, h)
    d = 0.5 * (fx - 1j * fy)
    dd = 0.25 * (fxx - fyy - 2j * fxy)
    ddbar = 0.25 * (fxx + fyy)
    return d, dd, ddbar


def rocflow_rhs(roc: RoCField, flow: FlowSpec, z_only: bool = False) -> RoCRates:
    """Right-hand sides of the (psi, |sigma|) evolution system.

    With E = exp(-i phi), P = d psi, S = d|sigma| and jet entries K_ij:

        psi_t   = Lphi psi   + Q1 - K - s K01
        |s|_t   = Lphi |s|   + Q2 + s K10
        Lphi f  = 1/2 w^2 (-K10 f_{d dbar} + K01 Re(E f_dd))

    Nodes with |sigma| <= sigma_min are masked (Q1, Q2 carry 1/|sigma|).
    ``z_only`` evaluates only the reaction terms on all interior nodes,
    the limit that applies on round spheres.
    """
    g = roc.geometry
    h = g.h
    w = g.w
    xib = g.xi.conj()
    dps, dss, masks = [], [], []
    for cid in G.CHARTS:
        psi = getattr(roc.psi, cid).values
        sig = getattr(roc.sigma, cid).values
        s_abs = np.abs(sig)
        if z_only:
            mask = g.interior.copy()
        else:
            mask = g.interior & (s_abs > roc.sigma_min)
        p = np.where(mask, psi, 2.0)
        sv = np.where(mask, s_abs, 1.0)
        j = flow.jet(p, sv)
        K, K10, K01, K20, K11, K02 = (np.broadcast_to(np.asarray(v, dtype=float), p.shape)
                                      for v in j.as_tuple())
        if z_only:
            dpsi = -K - sv * K01
            dsig = sv * K10
        else:
            with np.errstate(divide="ignore", invalid="ignore"):
                E = np.where(mask, sig.conj() / sv, 0.0)
                P, Pdd, Pddb = _complex_derivs(psi, h)
                s_, sx, sy, sxx, syy, sxy = _abs_sigma_derivs(sig, h)
                S = 0.5 * (sx - 1j * sy)
                Sdd = 0.25 * (sxx - syy - 2j * sxy)
                Sddb = 0.25 * (sxx + syy)
                half_w2 = 0.5 * w * w
                lap_psi = half_w2 * (-K10 * Pddb + K01 * np.real(E * Pdd))
                lap_s = half_w2 * (-K10 * Sddb + K01 * np.real(E * Sdd))
                P2 = np.abs(P) ** 2
                S2 = np.abs(S) ** 2
                EPS = 2 * np.real(E * P * S)
                Q1 = half_w2 * (-(K01 + sv * K20) / sv * P2 - K01 / sv * EPS
                                - K11 * 2 * np.real(P * S.conj()) - (K01 + sv * K02) / sv * S2) \
                    + 0.5 * w * K01 * 2 * np.real(xib * E * P)
                Q2 = half_w2 * (K10 / sv * P2 + K20 * np.real(E * P * P) + (K10 + sv * K11) / sv * EPS
                                + K10 / sv * S2 + K02 * np.real(E * S * S)) \
                    + 0.5 * w * K01 * 2 * np.real(xib * E * S)
                dpsi = lap_psi + Q1 - K - sv * K01
                dsig = lap_s + Q2 + sv * K10
        dps.append(chart_grid(cid, np.where(mask, dpsi, np.nan)))
        dss.append(chart_grid(cid, np.where(mask, dsig, np.nan)))
        masks.append(chart_grid(cid, mask))
    return RoCRates(ChartPair(*dps), ChartPair(*dss), ChartPair(*masks))


@dataclass(frozen=True)
class ConsistencyReport:
    rel_err_psi: float
    rel_err_sigma: float
    nodes: int
    delta: float

    @property
    def rel_err(self) -> float:
        return max(self.rel_err_psi, self.rel_err_sigma)


def rocflow_consistency(field: SupportField, flow: FlowSpec, delta: float | None = None) -> ConsistencyReport:
    """Compare rocflow_rhs with centred time differences of compute_roc(advance).

    Errors are max-norm relative over owned nodes (|xi| <= 1) on the sigma
    mask, which covers each point of the sphere once.
    """
    roc = compute_roc(field)
    if delta is None:
        delta = 0.5 * adaptive_dt(field, flow, 0.2, roc)
    fwd = compute_roc(advance(field, flow, delta), check=False)
    bwd = compute_roc(advance(field, flow, -delta), check=False)
    rates = rocflow_rhs(roc, flow)
    g = roc.geometry
    errs = {"psi": [0.0, 0.0], "sigma": [0.0, 0.0]}
    nodes = 0
    for cid in G.CHARTS:
        mask = getattr(rates.mask, cid).values & g.owned
        nodes += int(mask.sum())
        fd_psi = (getattr(fwd.psi, cid).values - getattr(bwd.psi, cid).values) / (2 * delta)
        fd_s = (np.abs(getattr(fwd.sigma, cid).values) - np.abs(getattr(bwd.sigma, cid).values)) / (2 * delta)
        for key, fd, an in (("psi", fd_psi, getattr(rates.dpsi, cid).values),
                            ("sigma", fd_s, getattr(rates.dsigma, cid).values)):
            errs[key][0] = max(errs[key][0], float(np.abs(an - fd)[mask].max()))
            errs[key][1] = max(errs[key][1], float(np.abs(fd)[mask].max()))
    rel = {k: v[0] / max(v[1], 1e-300) for k, v in errs.items()}
    return ConsistencyReport(rel["psi"], rel["sigma"], nodes, float(delta))


# --------------------------------------------------------------------------
# solitons


@dataclass(frozen=True)
class SolitonReport:
    lam: float
    residual: ChartPair
    max_residual: float
    mean_residual: float


def soliton_residual(field: SupportField, flow: FlowSpec) -> SolitonReport:
    """Best homothetic constant lam* = sum(w r K) / sum(w r^2) and the residual lam* r - K.

    Weights are partition of unity times the sphere area element.
    """
    roc = compute_roc(field)
    g = roc.geometry
    m = g.interior
    wgt = np.concatenate([(g.pou * g.area)[m]] * 2)
    r = np.concatenate([field.north.values[m], field.south.values[m]])
    _, _, psi, s, jet = _interior_jet(roc, flow)
    K = np.broadcast_to(np.asarray(jet.K, dtype=float), psi.shape)
    lam = float(np.sum(wgt * r * K) / np.sum(wgt * r * r))
    res = lam * r - K
    support = wgt > 0
    mean = float(np.sum(wgt * np.abs(res)) / np.sum(wgt))
    return SolitonReport(lam, _split(res, g), float(np.abs(res[support]).max()), mean)

