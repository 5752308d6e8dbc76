"""Curvature data of a support function in Gauss coordinates.

With ``w = 1 + |xi|^2`` and the complex derivatives ``d``, ``dbar``:

    F     = 1/2 w^2 dbar r
    psi   = r + w^2 d(F / w^2)          = r + (w^2 / 8) (r_xx + r_yy)
    sigma = -d conj(F)                  = -w conj(xi) d r - 1/2 w^2 d d r

psi is the mean radius of curvature and |sigma| half the difference of the
radii.  The expanded right-hand forms are what the solvers use (compact
second-difference stencils); the composed form for psi is kept only as a
reality diagnostic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import grid as G
from .errors import NonConvex, NonRealPsi, NotUmbilic
from .grid import NORTH, SOUTH, ChartGrid, ChartPair, SupportField, chart_grid

SIGMA_MIN_REL = 1e-6
SIGMA_UMB_REL = 0.02


def roc_arrays(r: np.ndarray, geom: G.ChartGeometry):
    """psi and sigma arrays from one chart of support values (NaN on the border)."""
    h = geom.h
    rx, ry, rxx, ryy, rxy = G.wirtinger(r, h)
    w = geom.w
    psi = r + (w * w / 8.0) * (rxx + ryy)
    d_r = 0.5 * (rx - 1j * ry)
    dd_r = 0.25 * (rxx - ryy - 2j * rxy)
    sigma = -w * geom.xi.conj() * d_r - 0.5 * w * w * dd_r
    return psi, sigma


def _f_array(r: np.ndarray, geom: G.ChartGeometry) -> np.ndarray:
    return 0.5 * geom.w**2 * G.dzbar(r, geom.h)


def compute_F(field: SupportField) -> ChartPair:
    """The complex section ``F = 1/2 (1 + |xi|^2)^2 dbar r`` on both charts."""
    geom = field.geometry
    return ChartPair(
        chart_grid(NORTH, _f_array(field.north.values, geom)),
        chart_grid(SOUTH, _f_array(field.south.values, geom)),
    )


def _psi_imag(r: np.ndarray, geom: G.ChartGeometry) -> np.ndarray:
    w2 = geom.w**2
    lit = w2 * G.dz(_f_array(r, geom) / w2, geom.h)
    return lit.imag


@dataclass(frozen=True, eq=False)
class RoCField:
    """psi and sigma on both charts plus the validity diagnostics."""

    psi: ChartPair
    sigma: ChartPair
    t: float = 0.0
    im_psi_max: float = 0.0
    convexity_margin: float = math.inf
    psi_scale: float = 1.0
    extras: dict = field(default_factory=dict)

    @property
    def geometry(self) -> G.ChartGeometry:
        return self.psi.north.geometry

    @property
    def h(self) -> float:
        return self.psi.north.h

    @property
    def convex(self) -> bool:
        return self.convexity_margin > 0

    @property
    def sigma_min(self) -> float:
        return SIGMA_MIN_REL * self.psi_scale

    @property
    def sigma_umb(self) -> float:
        return SIGMA_UMB_REL * self.mean_psi

    @property
    def mean_psi(self) -> float:
        g = self.geometry
        tot = G.sphere_integral(self.psi.north.values, self.psi.south.values, g)
        return tot / (4.0 * math.pi)

    def abs_sigma(self) -> ChartPair:
        return self.sigma.map(lambda c: c.with_values(np.abs(c.values)))

    def phi(self) -> ChartPair:
        """Principal-direction angle arg(sigma); NaN where sigma vanishes."""
        def arg(c):
            v = np.where(np.abs(c.values) > self.sigma_min, np.angle(c.values), np.nan)
            return c.with_values(v)
        return self.sigma.map(arg)

    def interior_samples(self):
        """(psi, |sigma|) at interior nodes of both charts, concatenated."""
        m = self.geometry.interior
        psi = np.concatenate([self.psi.north.values[m], self.psi.south.values[m]])
        s = np.concatenate([np.abs(self.sigma.north.values[m]), np.abs(self.sigma.south.values[m])])
        return psi, s


def compute_roc(field: SupportField, check: bool = True) -> RoCField:
    """Mean radius psi and complex slope sigma of ``field``.

    Raises :class:`NonConvex` if psi - |sigma| <= 0 at an interior node and
    :class:`NonRealPsi` if the composed definition of psi has an imaginary
    part above ``10 h^4`` times the psi scale.
    """
    geom = field.geometry
    m = geom.interior
    psis, sigmas, ims = [], [], []
    for cid, grid in ((NORTH, field.north), (SOUTH, field.south)):
        psi, sigma = roc_arrays(grid.values, geom)
        psis.append(chart_grid(cid, psi))
        sigmas.append(chart_grid(cid, sigma))
        if check:
            ims.append(np.abs(_psi_imag(grid.values, geom)[m]).max())
    psi_i = np.concatenate([p.values[m] for p in psis])
    s_i = np.concatenate([np.abs(s.values[m]) for s in sigmas])
    margin = float((psi_i - s_i).min())
    scale = float(np.abs(psi_i).max())
    roc = RoCField(
        ChartPair(*psis), ChartPair(*sigmas), t=field.t,
        im_psi_max=float(max(ims)) if ims else 0.0,
        convexity_margin=margin, psi_scale=scale,
    )
    if check:
        tol_im = 10.0 * geom.h**4 * scale
        if not roc.im_psi_max < tol_im:
            raise NonRealPsi(f"|Im psi| = {roc.im_psi_max:.3e} >= {tol_im:.3e}")
        if not margin > 0:
            raise NonConvex(f"psi - |sigma| reaches {margin:.3e}", margin)
    return roc


# --------------------------------------------------------------------------
# surface reconstruction

_FLIP = np.array([1.0, -1.0, -1.0])


def _vertices(r: np.ndarray, geom: G.ChartGeometry) -> np.ndarray:
    xi = geom.xi
    xib = xi.conj()
    w = geom.w
    F = _f_array(r, geom)
    Fb = F.conj()
    q = (xi * xib).real
    x12 = (2.0 * (F - Fb * xi * xi) + 2.0 * xi * w * r) / (w * w)
    x3 = (-2.0 * (F * xib + Fb * xi).real + (1.0 - q * q) * r) / (w * w)
    return np.stack([x12.real, x12.imag, x3], axis=-1)


@dataclass(frozen=True, eq=False)
class SurfaceMesh:
    vertices: np.ndarray  # (V, 3)
    normals: np.ndarray  # (V, 3)
    faces: np.ndarray  # (F, 4), zero-based vertex indices
    support: np.ndarray  # r at each vertex

    def support_residual(self) -> float:
        """max |x . n - r| over vertices."""
        return float(np.abs(np.einsum("vi,vi->v", self.vertices, self.normals) - self.support).max())


def reconstruct_surface(field: SupportField, blend: bool = True) -> SurfaceMesh:
    """Embedded surface from its support function.

    Each chart contributes the nodes with ``|xi| <= 1 + 2h`` (so the two
    patches overlap by a thin strip and leave no gap).  With ``blend`` the
    vertices in the chart overlap are averaged with the opposite chart's
    reconstruction using the partition-of-unity weights.  Only the tangential
    part x - r n is blended (projected onto the local tangent plane), so the
    support identity x . n = r holds exactly at every vertex.
    """
    geom = field.geometry
    h = geom.h
    keep = np.abs(geom.xi) <= 1.0 + 2.0 * h + 1e-12
    raw = {NORTH: _vertices(field.north.values, geom), SOUTH: _vertices(field.south.values, geom)}
    raw[SOUTH] = raw[SOUTH] * _FLIP
    verts, norms, supp, faces = [], [], [], []
    offset = 0
    for cid, other, grid in ((NORTH, SOUTH, field.north), (SOUTH, NORTH, field.south)):
        v = raw[cid].copy()
        if blend:
            sel = keep & (np.abs(geom.xi) >= 1.0 / G.R_CHART)
            pts = G.transfer_coordinate(geom.xi[sel])
            nrm = G.chart_normal(geom.xi, cid)[sel]
            r = grid.values[sel][:, None]
            tan_other = raw[other] - getattr(field, other).values[..., None] * G.chart_normal(geom.xi, other)
            ov = np.stack([G.interpolate(tan_other[..., k], h, pts) for k in range(3)], axis=-1)
            ov -= np.einsum("vi,vi->v", ov, nrm)[:, None] * nrm
            wgt = geom.pou[sel][:, None]
            v[sel] = r * nrm + wgt * (v[sel] - r * nrm) + (1.0 - wgt) * ov
        index = -np.ones(keep.shape, dtype=int)
        index[keep] = np.arange(keep.sum()) + offset
        verts.append(v[keep])
        norms.append(G.chart_normal(geom.xi, cid)[keep])
        supp.append(grid.values[keep])
        a, b = index[:-1, :-1], index[:-1, 1:]
        c, d = index[1:, 1:], index[1:, :-1]
        quad = np.stack([a, b, c, d], axis=-1).reshape(-1, 4)
        quad = quad[(quad >= 0).all(axis=1)]
        faces.append(quad)
        offset += int(keep.sum())
    return SurfaceMesh(np.concatenate(verts), np.concatenate(norms), np.concatenate(faces), np.concatenate(supp))


# --------------------------------------------------------------------------
# diagnostics


def codazzi_residual(roc: RoCField) -> ChartPair:
    """|d psi + w^2 dbar(sigma / w^2)| per node; zero for any genuine surface."""
    geom = roc.geometry
    w2 = geom.w**2
    out = []
    for cid in G.CHARTS:
        psi = getattr(roc.psi, cid).values
        sig = getattr(roc.sigma, cid).values
        res = G.dz(psi, geom.h) + w2 * G.dzbar(sig / w2, geom.h)
        out.append(chart_grid(cid, np.abs(res)))
    return ChartPair(*out)


def max_interior(pair: ChartPair) -> float:
    m = pair.north.geometry.interior
    return float(max(np.nanmax(pair.north.values[m]), np.nanmax(pair.south.values[m])))


@dataclass(frozen=True)
class HyperbolicArea:
    value: float  # signed integral
    absolute: float  # integral of |density| (unsigned area with multiplicity)
    excluded_fraction: float  # share of sphere area skipped because |sigma| <= sigma_min
    excluded_nodes: int


def _abs_sigma_derivs(sigma: np.ndarray, h: float):
    """Derivatives of |sigma| from those of sigma.

    With u = conj(sigma)/|sigma| (unit modulus), |sigma|_x = Re(u sigma_x) and
    |sigma|_xx = Re(u sigma_xx) + Im(u sigma_x)^2 / |sigma|; the difference
    error of sigma is never divided by |sigma| in the first derivatives.
    """
    s = np.abs(sigma)
    sx_, sy_, sxx_, syy_, sxy_ = G.wirtinger(sigma, h)
    with np.errstate(divide="ignore", invalid="ignore"):
        u = sigma.conj() / s
        ax, ay = u * sx_, u * sy_
        sx, sy = ax.real, ay.real
        sxx = (u * sxx_).real + ax.imag**2 / s
        syy = (u * syy_).real + ay.imag**2 / s
        sxy = (u * sxy_).real + ax.imag * ay.imag / s
    return s, sx, sy, sxx, syy, sxy


def hyperbolic_roc_area(roc: RoCField, sigma_cut: float | None = None) -> HyperbolicArea:
    """Signed integral of d psi ^ d|sigma| / |sigma|^2 over the sphere.

    Nodes with |sigma| <= sigma_min are skipped and their area reported.
    The density is an exact form away from umbilics, so on a closed surface
    the signed total is zero up to discretization error; the unsigned
    integral is reported alongside; it diverges logarithmically at umbilics
    (they sit at infinity in the hyperbolic metric), so comparisons across
    grids should pass a fixed ``sigma_cut`` that replaces sigma_min.
    """
    geom = roc.geometry
    h = geom.h
    m = geom.interior
    total = 0.0
    absolute = 0.0
    skipped_area = 0.0
    skipped = 0
    for cid in G.CHARTS:
        psi = getattr(roc.psi, cid).values
        sig = getattr(roc.sigma, cid).values
        s, sx, sy, *_ = _abs_sigma_derivs(sig, h)
        px, py = G.d_x(psi, h), G.d_y(psi, h)
        ok = m & (s > (roc.sigma_min if sigma_cut is None else max(sigma_cut, roc.sigma_min)))
        bad = m & ~ok & (geom.pou > 0)
        dens = (px * sy - py * sx) / np.where(ok, s * s, 1.0)
        total += float(np.sum((geom.pou * dens)[ok]) * h * h)
        absolute += float(np.sum((geom.pou * np.abs(dens))[ok]) * h * h)
        skipped_area += float(np.sum((geom.pou * geom.area)[bad]))
        skipped += int(bad.sum())
    return HyperbolicArea(total, absolute, skipped_area / (4.0 * math.pi), skipped)


@dataclass(frozen=True)
class KappaReport:
    samples: np.ndarray  # (n_radii, n_directions)
    spread: float
    indeterminate: bool
    seed: tuple
    radii: tuple

    @property
    def mean(self) -> float:
        return float(np.nanmean(self.samples))


def find_umbilics(roc: RoCField) -> list[tuple[str, int, int]]:
    """Nodes that are local minima of |sigma| below sigma_umb.

    Only nodes of each chart's own hemisphere (|xi| <= 1) are searched, so an
    umbilic on the equator can appear once per chart.
    """
    geom = roc.geometry
    found = []
    thr = roc.sigma_umb
    for cid in G.CHARTS:
        s = np.abs(getattr(roc.sigma, cid).values)
        pad = np.where(np.isnan(s), np.inf, s)
        nb = np.stack([np.roll(np.roll(pad, di, 0), dj, 1)
                       for di in (-1, 0, 1) for dj in (-1, 0, 1) if di or dj])
        is_min = (pad <= nb.min(axis=0)) & (pad < thr) & geom.owned
        for i, j in zip(*np.nonzero(is_min)):
            found.append((cid, int(i), int(j)))
    return found


def umbilic_kappa(roc: RoCField, seed, n_directions: int = 16,
                  radii_steps=(3, 5, 7)) -> KappaReport:
    """Directional slopes (psi(p) - psi(p0)) / |sigma(p)| around an umbilic.

    ``seed`` is ``(chart_id, i, j)``.  Samples are taken on rays at radii
    ``k * h`` by bicubic interpolation of psi and of the complex sigma.
    """
    cid, i, j = seed
    geom = roc.geometry
    h = geom.h
    psi = getattr(roc.psi, cid).values
    sig = getattr(roc.sigma, cid).values
    s0 = abs(sig[i, j])
    if not s0 < roc.sigma_umb:
        raise NotUmbilic(f"|sigma| = {s0:.3e} at seed is not below {roc.sigma_umb:.3e}")
    p0 = geom.xi[i, j]
    ang = 2.0 * math.pi * np.arange(n_directions) / n_directions
    radii = tuple(k * h for k in radii_steps)
    pts = p0 + np.array(radii)[:, None] * np.exp(1j * ang)[None, :]
    ps = G.interpolate(psi, h, pts)
    ss = np.abs(G.interpolate(sig, h, pts))
    if ss.max() <= roc.sigma_min:
        nan = np.full(pts.shape, np.nan)
        return KappaReport(nan, math.nan, True, tuple(seed), radii)
    samples = (ps - psi[i, j]) / ss
    return KappaReport(samples, float(samples.max() - samples.min()), False, tuple(seed), radii)
