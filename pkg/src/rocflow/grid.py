"""Two-chart stereographic grids on the Gauss sphere.

Each chart is a uniform Cartesian grid in the complex coordinate
``xi = x + i y``.  The north chart uses the standard coordinate, for which the
unit normal is

    n(xi) = (2x, 2y, 1 - |xi|^2) / (1 + |xi|^2),

so ``xi = 0`` is the north pole.  The south chart applies the same formulas to
the body rotated by pi about the x-axis, ``R = diag(1, -1, -1)``; a point with
north coordinate ``xi`` has south coordinate ``1 / xi``.  Because ``R`` is a
rotation, the curvature scalars psi and |sigma| computed on either chart agree.

Layout: ``n_core`` nodes per direction span ``[-R_CHART, R_CHART]`` and
``GHOST`` extra layers pad every side so that five-point stencils evaluated on
the chart disk, and stencils of stencils, stay inside the array.  Nodes with
``|xi| <= R_CHART`` are *interior* (evolved); all other nodes are *fringe* and
are refilled from the opposite chart by bicubic Lagrange interpolation.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, replace
from typing import Callable, NamedTuple

import numpy as np

from .errors import GridTooCoarse, OverlapMismatch

R_CHART = 1.25
GHOST = 4

NORTH = "north"
SOUTH = "south"
CHARTS = (NORTH, SOUTH)


class ChartPair(NamedTuple):
    north: object
    south: object

    def map(self, fn):
        return ChartPair(fn(self.north), fn(self.south))


# --------------------------------------------------------------------------
# coordinates and normals


def chart_normal(xi, chart_id: str = NORTH) -> np.ndarray:
    """Unit normal of the Gauss sphere at chart coordinate ``xi``.

    Accepts scalars or arrays; the last axis of the result holds (n1, n2, n3).
    """
    xi = np.asarray(xi, dtype=complex)
    q = (xi * xi.conj()).real
    w = 1.0 + q
    n = np.stack([2.0 * xi.real / w, 2.0 * xi.imag / w, (1.0 - q) / w], axis=-1)
    if chart_id == SOUTH:
        n = n * np.array([1.0, -1.0, -1.0])
    elif chart_id != NORTH:
        raise ValueError(f"unknown chart {chart_id!r}")
    return n


def normal_to_chart(n: np.ndarray, chart_id: str = NORTH) -> np.ndarray:
    """Inverse of :func:`chart_normal` (undefined at the opposite pole)."""
    n = np.asarray(n, dtype=float)
    if chart_id == SOUTH:
        n = n * np.array([1.0, -1.0, -1.0])
    with np.errstate(divide="ignore", invalid="ignore"):
        return (n[..., 0] + 1j * n[..., 1]) / (1.0 + n[..., 2])


def transfer_coordinate(xi):
    """Coordinate of the same sphere point in the opposite chart."""
    return 1.0 / np.asarray(xi, dtype=complex)


# --------------------------------------------------------------------------
# finite differences (fourth order, central)


def _blank(f):
    return np.full(f.shape, np.nan, dtype=np.result_type(f.dtype, float))


def d_x(f: np.ndarray, h: float) -> np.ndarray:
    out = _blank(f)
    out[:, 2:-2] = (f[:, :-4] - 8.0 * f[:, 1:-3] + 8.0 * f[:, 3:-1] - f[:, 4:]) / (12.0 * h)
    return out


def d_y(f: np.ndarray, h: float) -> np.ndarray:
    out = _blank(f)
    out[2:-2, :] = (f[:-4, :] - 8.0 * f[1:-3, :] + 8.0 * f[3:-1, :] - f[4:, :]) / (12.0 * h)
    return out


def d_xx(f: np.ndarray, h: float) -> np.ndarray:
    out = _blank(f)
    out[:, 2:-2] = (
        -f[:, :-4] + 16.0 * f[:, 1:-3] - 30.0 * f[:, 2:-2] + 16.0 * f[:, 3:-1] - f[:, 4:]
    ) / (12.0 * h * h)
    return out


def d_yy(f: np.ndarray, h: float) -> np.ndarray:
    out = _blank(f)
    out[2:-2, :] = (
        -f[:-4, :] + 16.0 * f[1:-3, :] - 30.0 * f[2:-2, :] + 16.0 * f[3:-1, :] - f[4:, :]
    ) / (12.0 * h * h)
    return out


def d_xy(f: np.ndarray, h: float) -> np.ndarray:
    return d_x(d_y(f, h), h)


def wirtinger(f: np.ndarray, h: float):
    """Return ``(f_x, f_y, f_xx, f_yy, f_xy)`` on the array."""
    fy = d_y(f, h)
    return d_x(f, h), fy, d_xx(f, h), d_yy(f, h), d_x(fy, h)


def dz(f: np.ndarray, h: float) -> np.ndarray:
    """Complex derivative ``d = (d_x - i d_y) / 2``."""
    return 0.5 * (d_x(f, h) - 1j * d_y(f, h))


def dzbar(f: np.ndarray, h: float) -> np.ndarray:
    """Conjugate derivative ``dbar = (d_x + i d_y) / 2``."""
    return 0.5 * (d_x(f, h) + 1j * d_y(f, h))


# --------------------------------------------------------------------------
# interpolation


def _lagrange4(t):
    """Cubic Lagrange weights for nodes at offsets -1, 0, 1, 2."""
    return (
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
        -(t + 1.0) * t * (t - 2.0) / 2.0,
        (t + 1.0) * t * (t - 1.0) / 6.0,
    )


@dataclass(frozen=True, eq=False)
class InterpPlan:
    """Precomputed bicubic stencil: ``out = sum(weights * values[rows, cols])``."""

    rows: np.ndarray  # (k, 4, 4)
    cols: np.ndarray
    weights: np.ndarray

    def apply(self, values: np.ndarray) -> np.ndarray:
        return np.einsum("kab,kab->k", self.weights, values[self.rows, self.cols])


def make_interp_plan(points, h: float, center: int, size: int) -> InterpPlan:
    points = np.asarray(points, dtype=complex).ravel()
    u = points.real / h + center
    v = points.imag / h + center
    j0 = np.floor(u).astype(int)
    i0 = np.floor(v).astype(int)
    if i0.min(initial=1) < 1 or j0.min(initial=1) < 1 or max(i0.max(initial=0), j0.max(initial=0)) > size - 3:
        raise GridTooCoarse("interpolation stencil leaves the chart array")
    wx = np.stack(_lagrange4(u - j0), axis=-1)
    wy = np.stack(_lagrange4(v - i0), axis=-1)
    offs = np.arange(-1, 3)
    rows = (i0[:, None, None] + offs[None, :, None]) * np.ones((1, 1, 4), dtype=int)
    cols = (j0[:, None, None] + offs[None, None, :]) * np.ones((1, 4, 1), dtype=int)
    weights = wy[:, :, None] * wx[:, None, :]
    return InterpPlan(rows, cols, weights)


def interpolate(values: np.ndarray, h: float, points) -> np.ndarray:
    """Bicubic Lagrange interpolation of a chart array at complex ``points``."""
    size = values.shape[0]
    shape = np.shape(points)
    plan = make_interp_plan(points, h, (size - 1) // 2, size)
    return plan.apply(values).reshape(shape)


# --------------------------------------------------------------------------
# partition of unity


def pou_weight(xi, r_chart: float = R_CHART) -> np.ndarray:
    """Quintic blend in log|xi|: 1 inside |xi| <= 1/r_chart, 0 outside r_chart.

    Weights of the two charts at the same point sum to one.
    """
    a = np.abs(np.asarray(xi, dtype=complex))
    with np.errstate(divide="ignore"):
        t = np.log(a) / math.log(r_chart)
    u = np.clip((t + 1.0) / 2.0, 0.0, 1.0)
    return 1.0 - u**3 * (10.0 - 15.0 * u + 6.0 * u * u)


# --------------------------------------------------------------------------
# geometry cache


@dataclass(frozen=True, eq=False)
class ChartGeometry:
    n_core: int
    size: int
    center: int
    h: float
    xi: np.ndarray
    w: np.ndarray  # 1 + |xi|^2
    interior: np.ndarray
    fringe: np.ndarray
    owned: np.ndarray  # |xi| <= 1, one hemisphere
    annulus: np.ndarray  # interior nodes with |xi| >= 1/R_CHART
    pou: np.ndarray
    area: np.ndarray  # sphere area element per node, 4 h^2 / w^2
    fringe_plan: InterpPlan
    annulus_plan: InterpPlan


def min_core_nodes(r_chart: float = R_CHART) -> int:
    """Smallest odd ``n_core`` whose fringe donors are all interior nodes."""
    n = 5
    while True:
        h = 2.0 * r_chart / (n - 1)
        if 1.0 / r_chart + 2.0 * math.sqrt(2.0) * h < r_chart:
            return n
        n += 2


@functools.lru_cache(maxsize=16)
def chart_geometry(n_core: int) -> ChartGeometry:
    if n_core % 2 == 0:
        raise GridTooCoarse(f"n_core must be odd so xi = 0 is a node, got {n_core}")
    if n_core < min_core_nodes():
        raise GridTooCoarse(
            f"n_core={n_core} too coarse: chart overlap cannot host interpolation "
            f"stencils (need n_core >= {min_core_nodes()})"
        )
    h = 2.0 * R_CHART / (n_core - 1)
    size = n_core + 2 * GHOST
    c = (size - 1) // 2
    idx = np.arange(size) - c
    x = idx[None, :] * h
    y = idx[:, None] * h
    xi = x + 1j * y
    a = np.abs(xi)
    w = 1.0 + a * a
    eps = 1e-12
    interior = a <= R_CHART + eps
    fringe = ~interior
    owned = a <= 1.0 + eps
    annulus = interior & (a >= 1.0 / R_CHART - eps)
    pou = pou_weight(xi)
    area = 4.0 * h * h / (w * w)
    fringe_plan = make_interp_plan(transfer_coordinate(xi[fringe]), h, c, size)
    donor_xi = xi[fringe_plan.rows, fringe_plan.cols]
    if np.abs(donor_xi).max() > R_CHART + eps:
        raise GridTooCoarse("fringe donors reach fringe nodes of the opposite chart")
    annulus_plan = make_interp_plan(transfer_coordinate(xi[annulus]), h, c, size)
    for arr in (xi, w, interior, fringe, owned, annulus, pou, area):
        arr.setflags(write=False)
    return ChartGeometry(
        n_core, size, c, h, xi, w, interior, fringe, owned, annulus, pou, area,
        fringe_plan, annulus_plan,
    )


def geometry_for(values: np.ndarray) -> ChartGeometry:
    return chart_geometry(values.shape[0] - 2 * GHOST)


# --------------------------------------------------------------------------
# data containers


@dataclass(frozen=True, eq=False)
class ChartGrid:
    """Samples of a real or complex function on one chart."""

    chart_id: str
    h: float
    half_width: float
    values: np.ndarray

    def __post_init__(self):
        if self.h <= 0:
            raise ValueError("grid spacing must be positive")
        if self.values.ndim != 2 or self.values.shape[0] != self.values.shape[1]:
            raise ValueError("chart values must be a square 2-D array")
        if self.values.shape[0] % 2 == 0:
            raise ValueError("chart arrays need odd dimensions")

    @property
    def geometry(self) -> ChartGeometry:
        return geometry_for(self.values)

    @property
    def xi(self) -> np.ndarray:
        return self.geometry.xi

    def interior_values(self) -> np.ndarray:
        return self.values[self.geometry.interior]

    def with_values(self, values: np.ndarray) -> "ChartGrid":
        return replace(self, values=values)


def chart_grid(chart_id: str, values: np.ndarray) -> ChartGrid:
    g = geometry_for(values)
    return ChartGrid(chart_id, g.h, R_CHART, values)


def fill_fringe(north: np.ndarray, south: np.ndarray, geom: ChartGeometry | None = None):
    """Overwrite fringe nodes of each chart with interpolants of the other.

    Donors are interior nodes only, so the two fills are independent.
    """
    geom = geom or geometry_for(north)
    plan = geom.fringe_plan
    n_new = plan.apply(south)
    s_new = plan.apply(north)
    north[geom.fringe] = n_new
    south[geom.fringe] = s_new
    return north, south


def sphere_integral(north: np.ndarray, south: np.ndarray, geom: ChartGeometry | None = None) -> float:
    """Integral over the unit sphere of a function sampled on both charts."""
    geom = geom or geometry_for(north)
    wgt = geom.pou * geom.area
    m = geom.interior
    return float(np.sum((wgt * north)[m]) + np.sum((wgt * south)[m]))


def overlap_error(north: np.ndarray, south: np.ndarray, geom: ChartGeometry | None = None) -> float:
    """Max mismatch between the charts on the interior overlap annulus."""
    geom = geom or geometry_for(north)
    plan = geom.annulus_plan
    e1 = np.abs(north[geom.annulus] - plan.apply(south))
    e2 = np.abs(south[geom.annulus] - plan.apply(north))
    return float(max(e1.max(), e2.max()))


def overlap_tolerance(h: float, scale: float) -> float:
    return 10.0 * h**4 * scale


@dataclass(frozen=True, eq=False)
class SupportField:
    """Support function of a convex body sampled on two charts.

    ``t`` is the flow time attached to this state.
    """

    north: ChartGrid
    south: ChartGrid
    t: float = 0.0

    @property
    def h(self) -> float:
        return self.north.h

    @property
    def n_core(self) -> int:
        return self.north.geometry.n_core

    @property
    def geometry(self) -> ChartGeometry:
        return self.north.geometry

    @property
    def scale(self) -> float:
        g = self.geometry
        return float(max(np.abs(self.north.values[g.interior]).max(), np.abs(self.south.values[g.interior]).max()))

    def arrays(self):
        return self.north.values, self.south.values

    @classmethod
    def from_arrays(cls, north: np.ndarray, south: np.ndarray, t: float = 0.0,
                    recenter: bool = True, check: bool = True) -> "SupportField":
        north = np.array(north, dtype=float)
        south = np.array(south, dtype=float)
        if north.shape != south.shape:
            raise ValueError("chart arrays differ in shape")
        field = cls(chart_grid(NORTH, north), chart_grid(SOUTH, south), float(t))
        if recenter:
            field = field.recentered()
        if check:
            field.check_overlap()
        return field

    @classmethod
    def from_function(cls, func: Callable[[np.ndarray], np.ndarray], n_core: int,
                      t: float = 0.0, recenter: bool = True) -> "SupportField":
        """Sample ``func(normals)`` on every node of both charts.

        ``normals`` has shape ``(..., 3)``; ``func`` returns the support value.
        """
        geom = chart_geometry(n_core)
        arrays = [np.asarray(func(chart_normal(geom.xi, c)), dtype=float) for c in CHARTS]
        return cls.from_arrays(*arrays, t=t, recenter=recenter, check=True)

    @classmethod
    def sphere(cls, radius: float, n_core: int, center=(0.0, 0.0, 0.0)) -> "SupportField":
        center = np.asarray(center, dtype=float)
        return cls.from_function(lambda n: radius + n @ center, n_core, recenter=False)

    def with_arrays(self, north: np.ndarray, south: np.ndarray, t: float | None = None) -> "SupportField":
        return SupportField(
            self.north.with_values(north), self.south.with_values(south),
            self.t if t is None else float(t),
        )

    def overlap_error(self) -> float:
        return overlap_error(self.north.values, self.south.values, self.geometry)

    def check_overlap(self) -> None:
        err = self.overlap_error()
        tol = overlap_tolerance(self.h, self.scale)
        if not err <= tol:
            raise OverlapMismatch(f"chart overlap mismatch {err:.3e} exceeds {tol:.3e}")

    def steiner_point(self) -> np.ndarray:
        """(3 / 4 pi) * integral of r n over the sphere."""
        g = self.geometry
        out = np.zeros(3)
        for cid, grid in ((NORTH, self.north), (SOUTH, self.south)):
            n = chart_normal(g.xi, cid)
            wgt = (g.pou * g.area * grid.values)[g.interior]
            out += wgt @ n[g.interior]
        return 3.0 / (4.0 * math.pi) * out

    def translated(self, shift) -> "SupportField":
        """Support function of the body translated by ``shift``."""
        shift = np.asarray(shift, dtype=float)
        g = self.geometry
        arrays = [grid.values + chart_normal(g.xi, cid) @ shift
                  for cid, grid in ((NORTH, self.north), (SOUTH, self.south))]
        return self.with_arrays(*arrays)

    def recentered(self) -> "SupportField":
        """Move the Steiner point to the origin when some r <= 0."""
        g = self.geometry
        lo = min(self.north.values[g.interior].min(), self.south.values[g.interior].min())
        if lo > 0:
            return self
        moved = self.translated(-self.steiner_point())
        lo = min(moved.north.values[g.interior].min(), moved.south.values[g.interior].min())
        if lo <= 0:
            raise ValueError("support function not positive after Steiner re-centering")
        return moved
