"""Matplotlib figures for the report commands.

Figures are rendered with the Agg backend and a fixed SVG hash salt, and
without a creation date, so repeated runs write identical files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "svg.hashsalt": "rocflow",
    "svg.fonttype": "none",
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "lines.linewidth": 1.0,
    "figure.dpi": 100,
}


def _save(fig, path):
    fmt = str(path).rsplit(".", 1)[-1]
    meta = {"Date": None} if fmt in ("svg", "pdf") else {}
    fig.savefig(path, format=fmt, metadata=meta, bbox_inches="tight")
    plt.close(fig)


def _diagonal(ax, top):
    d = np.array([0.0, top])
    ax.plot(d, d, color="0.4", lw=0.8, ls="--", label=r"$\psi = |\sigma|$")


def roc_diagram(path, psi, s, footer: str, title: str = "radii of curvature diagram",
                warning: str | None = None):
    """Scatter of (psi, |sigma|) with the diagonal psi = |sigma| drawn."""
    psi = np.asarray(psi)
    s = np.asarray(s)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5, 4))
        top = 1.1 * float(max(psi.max(), s.max(), 1e-12))
        _diagonal(ax, top)
        ax.scatter(psi, s, s=2, color="C0", alpha=0.6, lw=0, label="grid nodes")
        ax.set_xlim(0, top)
        ax.set_ylim(0, top)
        ax.set_aspect("equal")
        ax.set_xlabel(r"$\psi$")
        ax.set_ylabel(r"$|\sigma|$")
        ax.set_title(title if warning is None else f"{title} [{warning}]")
        ax.legend(loc="upper left", frameon=False)
        fig.text(0.5, -0.02, footer, ha="center", va="top")
        _save(fig, path)


def flowline_plot(path, lines, region, title: str, marker=None):
    """Level sets of I = |sigma| K with arrows along the flow direction."""
    (p_lo, p_hi), _ = region
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5, 4))
        _diagonal(ax, p_hi)
        levels = sorted({ln.level for ln in lines})
        cmap = plt.get_cmap("viridis")
        for ln in lines:
            k = levels.index(ln.level) / max(len(levels) - 1, 1)
            pts = ln.points
            ax.plot(pts[:, 0], pts[:, 1], color=cmap(k), lw=0.9)
            if len(pts) > 3 and not ln.degenerate:
                i = len(pts) // 2
                ax.annotate("", xy=pts[i + 1], xytext=pts[i],
                            arrowprops=dict(arrowstyle="->", color=cmap(k), lw=0.9))
        if marker is not None:
            ax.plot([marker[0]], [marker[1]], "o", color="C3", ms=4)
        ax.set_xlim(0, p_hi)
        ax.set_ylim(0, p_hi)
        ax.set_aspect("equal")
        ax.set_xlabel(r"$\psi$")
        ax.set_ylabel(r"$|\sigma|$")
        ax.set_title(title)
        _save(fig, path)


def monitor_plot(path, series, title: str):
    cols = ("min_abs_K", "max_psi", "min_psi", "max_sigma", "min_convexity", "parab_margin_min")
    t = series.column("t")
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(2, 3, figsize=(9, 5), sharex=True)
        for ax, name in zip(axes.flat, cols):
            ax.plot(t, series.column(name), color="C0")
            ax.set_title(name)
        for ax in axes[1]:
            ax.set_xlabel("t")
        fig.suptitle(title)
        fig.tight_layout()
        _save(fig, path)


def ode_plot(path, ode_path, title: str):
    with plt.rc_context(STYLE):
        fig, (a1, a2) = plt.subplots(1, 2, figsize=(8, 3.5))
        top = 1.1 * float(ode_path.psi.max())
        _diagonal(a1, top)
        a1.plot(ode_path.psi, ode_path.s, color="C0")
        a1.plot(ode_path.psi[:1], ode_path.s[:1], "o", color="C3", ms=4)
        a1.set_xlim(0, top)
        a1.set_ylim(0, top)
        a1.set_aspect("equal")
        a1.set_xlabel(r"$\psi$")
        a1.set_ylabel(r"$|\sigma|$")
        a2.plot(ode_path.t, ode_path.invariant - ode_path.invariant[0], color="C1")
        a2.set_xlabel("t")
        a2.set_ylabel(r"$I(t) - I(0)$")
        fig.suptitle(title)
        fig.tight_layout()
        _save(fig, path)
