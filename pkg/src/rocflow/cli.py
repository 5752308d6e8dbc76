"""rocflow command-line interface.

    rocflow simulate  --config run.yaml
    rocflow roc       --snapshot out/snapshots/snap_0000.npz
    rocflow flowlines --flow gauss_curv_pow --n 1
    rocflow ode       --flow gauss_curv_pow --n 1 --psi0 2 --s0 1
    rocflow verify
    rocflow mesh      --grid 65

Exit codes: 0 success, 1 verification failure, 2 configuration error,
3 runtime abort.
"""

from __future__ import annotations

import argparse
import contextlib
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import io as rio
from . import plotting
from .errors import ConeExit, ConfigError, ExpressionSyntaxError, NonConvex, RocflowError
from .expr import flow_from_expression
from .flows import FlowSpec, make_flow
from .geometry import compute_roc, hyperbolic_roc_area, reconstruct_surface
from .grid import SupportField
from .ode import conserved, flowlines, integrate_ode
from .pde import MONITOR_COLUMNS, SimConfig, run_simulation
from .surfaces import harmonic_support, load_snapshot, random_surface, save_snapshot
from .verify import audit_printed_tables, run_verify

log = logging.getLogger("rocflow")

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_ABORT = 0, 1, 2, 3

# the frozen monitors.csv layout
MONITOR_CSV = ("t", "min_abs_K", "max_psi", "min_psi", "max_sigma", "min_convexity",
               "parab_margin_min", "epsilon")
assert set(MONITOR_CSV) <= set(MONITOR_COLUMNS)

ABORT_REASONS = ("ConvexityLost", "DomainExit")


class Abort(Exception):
    """Runtime abort carrying its reason code."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


# --------------------------------------------------------------------------
# configuration


def _overrides(args) -> dict:
    over = {}
    if getattr(args, "grid", None) is not None:
        over["grid"] = {"n": args.grid}
    if getattr(args, "tmax", None) is not None:
        over["time"] = {"t_max": args.tmax}
    if getattr(args, "out", None) is not None:
        over["outputs"] = {"dir": args.out}
    if getattr(args, "seed", None) is not None:
        over["seed"] = args.seed
    ode = {}
    if getattr(args, "psi0", None) is not None or getattr(args, "s0", None) is not None:
        ode["start"] = [args.psi0 if args.psi0 is not None else 2.0, args.s0 if args.s0 is not None else 1.0]
    for key in ("dt", "t_span"):
        if getattr(args, key, None) is not None:
            ode[key] = getattr(args, key)
    if ode:
        over["ode"] = ode
    return over


def _flow_override(cfg: dict, args) -> dict:
    params = {k: getattr(args, k) for k in ("n", "a", "b", "c", "norm") if getattr(args, k, None) is not None}
    if args.flow_expr is not None:
        if args.flow is not None or params:
            raise ConfigError("--flow-expr cannot be combined with --flow or flow parameters")
        return {"expr": args.flow_expr}
    if args.flow is not None:
        return {"catalog": args.flow, "params": params}
    if params:
        if "catalog" not in cfg["flow"]:
            raise ConfigError("flow parameters given but the configured flow is an expression")
        merged = dict(cfg["flow"].get("params", {}))
        merged.update(params)
        return {"catalog": cfg["flow"]["catalog"], "params": merged}
    return cfg["flow"]


def resolve_config(args) -> dict:
    cfg = rio.load_config(args.config, _overrides(args))
    cfg["flow"] = _flow_override(cfg, args)
    rio.validate_config(cfg)
    return cfg


def build_flow(cfg: dict) -> FlowSpec:
    doc = cfg["flow"]
    if "expr" in doc:
        return flow_from_expression(doc["expr"])
    return make_flow(doc["catalog"], **doc.get("params", {}))


def build_initial(cfg: dict) -> SupportField:
    ini = cfg["initial"]
    n = cfg["grid"]["n"]
    kind = ini["type"]
    radius = ini.get("radius", 1.0)
    if kind == "sphere":
        return SupportField.sphere(radius, n, ini.get("center", (0.0, 0.0, 0.0)))
    if kind == "harmonic":
        terms = [(t["l"], t.get("m", 0), t["amp"]) for t in ini.get("terms", [{"l": 2, "amp": 0.05}])]
        for l, m, _ in terms:
            if abs(m) > l:
                raise ConfigError(f"harmonic term has |m| > l (l={l}, m={m})")
        return SupportField.from_function(harmonic_support(terms, radius), n)
    if kind == "random":
        return random_surface(n, cfg["seed"], ini.get("amplitude", 0.05), ini.get("l_max", 4), radius)
    if "path" not in ini:
        raise ConfigError("initial surface of type snapshot needs a path")
    try:
        return load_snapshot(ini["path"])
    except (OSError, KeyError, ValueError) as exc:
        raise ConfigError(f"cannot read snapshot {ini['path']}: {exc}") from None


def build_region(cfg: dict):
    reg = cfg["region"]
    lo, hi = reg["psi"]
    if not 0 < lo < hi:
        raise ConfigError(f"region psi range must satisfy 0 < lo < hi, got [{lo}, {hi}]")
    frac = reg["s_max_frac"]
    return ((lo, hi), (0.0, lambda p: frac * p))


def _outdir(cfg: dict) -> Path:
    out = Path(cfg["outputs"]["dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _figure(cfg: dict, out: Path, stem: str) -> Path | None:
    if not cfg["outputs"]["figures"]:
        return None
    return out / f"{stem}.{cfg['outputs']['figure_format']}"


# --------------------------------------------------------------------------
# commands


def cmd_simulate(cfg: dict) -> int:
    flow = build_flow(cfg)
    initial = build_initial(cfg)
    stop = cfg["stop"]
    outs = cfg["outputs"]
    sim = SimConfig(
        flow, n_core=initial.n_core, cfl=cfg["time"]["cfl"], t_max=cfg["time"]["t_max"],
        min_convexity=stop["min_convexity"], min_psi_frac=stop["min_psi_frac"],
        converge_tol=stop["converge_tol"], monitor_every=outs["monitor_every"],
        snapshot_every=outs["snapshot_every"],
    )
    progress = lambda row: log.info("t=%.6g max_psi=%.6g max_sigma=%.3e", row["t"], row["max_psi"], row["max_sigma"])
    result = run_simulation(sim, initial, progress)
    out = _outdir(cfg)

    rows = [[r[c] for c in MONITOR_CSV] for r in result.monitors.rows]
    rio.write_csv(out / "monitors.csv", MONITOR_CSV, rows)
    doc = {
        "schema_version": rio.SCHEMA_VERSION,
        "flow": flow.describe(),
        "reason": result.reason,
        "message": result.message,
        "t_final": float(result.final.t),
        "steps": int(result.steps),
        "grid_n": int(result.final.n_core),
        "verdicts": {k: v.as_dict() for k, v in sorted(result.verdicts.items())},
    }
    rio.write_json(out / "verdicts.json", doc, rio.VERDICTS_SCHEMA)
    snapdir = out / "snapshots"
    snapdir.mkdir(exist_ok=True)
    for k, snap in enumerate(result.snapshots):
        save_snapshot(snapdir / f"snap_{k:04d}.npz", snap)
        if outs["mesh"]:
            rio.write_obj(snapdir / f"snap_{k:04d}.obj", reconstruct_surface(snap),
                          f"rocflow surface t={snap.t!r}")
    fig = _figure(cfg, out, "monitors")
    if fig is not None:
        plotting.monitor_plot(fig, result.monitors, flow.describe())

    last = result.monitors.rows[-1]
    print(f"{result.reason}: t={last['t']:.6g} steps={result.steps} max_psi={last['max_psi']:.6g}")
    for k, v in sorted(result.verdicts.items()):
        print(f"  {k}: {v.status} ({v.detail}; worst {v.worst_violation:.3e})")
    if result.reason in ABORT_REASONS:
        raise Abort(result.reason, result.message or result.reason)
    return EXIT_OK


def cmd_roc(cfg: dict, snapshot=None) -> int:
    field = load_snapshot(snapshot) if snapshot else build_initial(cfg)
    roc = compute_roc(field, check=False)
    geom = roc.geometry
    out = _outdir(cfg)
    rows = []
    chunks = []
    for cid in ("north", "south"):
        m = geom.owned
        psi = getattr(roc.psi, cid).values[m]
        s = np.abs(getattr(roc.sigma, cid).values[m])
        rows += [[cid, p, q] for p, q in zip(psi, s)]
        chunks.append((psi, s))
    area = hyperbolic_roc_area(roc)
    footer = (f"hyperbolic RoC area = {area.value:.6e} (unsigned {area.absolute:.6e})"
              f" (nodes with |sigma| <= sigma_min excluded: {area.excluded_nodes},"
              f" {100 * area.excluded_fraction:.2f}% of sphere)")
    warning = None if roc.convex else "NON-CONVEX"
    rio.write_csv(out / "roc.csv", ("chart", "psi", "sigma"), rows)
    fig = _figure(cfg, out, "roc")
    if fig is not None:
        psi = np.concatenate([c[0] for c in chunks])
        s = np.concatenate([c[1] for c in chunks])
        plotting.roc_diagram(fig, psi, s, footer, title=f"RoC diagram, t = {field.t:.4g}", warning=warning)
    print(footer)
    print(f"min(psi - |sigma|) = {roc.convexity_margin:.6e}")
    if warning:
        raise NonConvex(f"snapshot is not convex: min(psi - |sigma|) = {roc.convexity_margin:.3e}",
                        roc.convexity_margin)
    return EXIT_OK


def cmd_flowlines(cfg: dict, through=None) -> int:
    flow = build_flow(cfg)
    region = build_region(cfg)
    fl = cfg["flowlines"]
    levels = fl["levels"]
    through = through or fl.get("through")
    if through is not None:
        p, q = map(float, through)
        level = float(conserved(flow, p, q))
        print(f"level through ({p:g}, {q:g}): I = s K = {level!r}")
        levels = [level] if isinstance(levels, int) else list(levels) + [level]
    lines = flowlines(flow, region, levels, fl["resolution"])
    out = _outdir(cfg)
    rows = []
    for k, ln in enumerate(lines):
        rows += [[k, ln.level, p, q] for p, q in ln.points]
    rio.write_csv(out / "flowlines.csv", ("line", "level", "psi", "s"), rows)
    fig = _figure(cfg, out, "flowlines")
    if fig is not None:
        plotting.flowline_plot(fig, lines, region, f"flowlines of {flow.describe()}", marker=through)
    print(f"{len(lines)} flowlines, {len(rows)} points")
    return EXIT_OK


def _write_path(out: Path, path) -> None:
    rio.write_csv(out / "path.csv", ("t", "psi", "s", "I"),
                  np.column_stack([path.t, path.psi, path.s, path.invariant]))


def cmd_ode(cfg: dict) -> int:
    flow = build_flow(cfg)
    ode = cfg["ode"]
    gap = ode["stop_gap"]
    stop = (lambda p, s: p - s < gap) if gap > 0 else None
    out = _outdir(cfg)
    try:
        path = integrate_ode(tuple(ode["start"]), flow, ode["t_span"], ode["dt"], stop)
    except ConeExit as exc:
        if exc.path is not None:
            _write_path(out, exc.path)
        raise
    _write_path(out, path)
    fig = _figure(cfg, out, "ode_path")
    if fig is not None:
        plotting.ode_plot(fig, path, f"{flow.describe()} from ({ode['start'][0]:g}, {ode['start'][1]:g})")
    print(f"stopped: {path.stopped} at t={path.t[-1]:.6g} (psi={path.psi[-1]:.6g}, s={path.s[-1]:.6g})")
    print(f"I(0) = {float(path.invariant[0])!r}  max drift = {path.drift:.3e}")
    return EXIT_OK


def cmd_verify(cfg: dict) -> int:
    results = run_verify()
    audit = audit_printed_tables()
    out = _outdir(cfg)
    doc = {
        "schema_version": rio.SCHEMA_VERSION,
        "passed": all(r.passed for r in results),
        "suites": [r.as_dict() for r in results],
        "printed_table_audit": audit,
    }
    rio.write_json(out / "verify_report.json", doc)
    text = [r.line() for r in results]
    (out / "verify_report.txt").write_text("\n".join(text) + "\n", encoding="utf-8")
    for line in text:
        print(line)
    failed = [r for r in results if not r.passed]
    if failed:
        cells = sorted({c for r in failed for c in (r.failures or [r.cell])})
        print(f"rocflow: verification failed in: {', '.join(cells)}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def cmd_mesh(cfg: dict, snapshot=None) -> int:
    field = load_snapshot(snapshot) if snapshot else build_initial(cfg)
    mesh = reconstruct_surface(field)
    out = _outdir(cfg)
    rio.write_obj(out / "surface.obj", mesh, f"rocflow surface t={field.t!r}")
    print(f"{len(mesh.vertices)} vertices, {len(mesh.faces)} quads, max |x.n - r| = {mesh.support_residual():.3e}")
    return EXIT_OK


# --------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="YAML or JSON run configuration")
    common.add_argument("--flow", metavar="NAME",
                        choices=("mean_curv_pow", "gauss_curv_pow", "mean_radius_pow", "linear_weingarten"))
    common.add_argument("--flow-expr", metavar="STRING", help="K(psi, s) as an expression")
    common.add_argument("--n", type=float, help="power for the power flows")
    common.add_argument("-a", type=float)
    common.add_argument("-b", type=float)
    common.add_argument("-c", type=float)
    common.add_argument("--norm", choices=("table", "geometric"),
                        help="mean_curv_pow normalisation (geometric: H = 1/r1 + 1/r2)")
    common.add_argument("--grid", type=int, metavar="N", help="core nodes per chart axis")
    common.add_argument("--tmax", type=float, metavar="T")
    common.add_argument("--out", metavar="DIR")
    common.add_argument("--seed", type=int)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="rocflow", description="Curvature flows of convex spheres in radii-of-curvature space")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="run the support-function evolution")
    p = sub.add_parser("roc", parents=[common], help="radii of curvature diagram")
    p.add_argument("--snapshot", metavar="NPZ")
    p = sub.add_parser("flowlines", parents=[common], help="level sets of I = s K")
    p.add_argument("--through", type=float, nargs=2, metavar=("PSI", "S"))
    p = sub.add_parser("ode", parents=[common], help="integrate the spatially homogeneous flow")
    p.add_argument("--psi0", type=float)
    p.add_argument("--s0", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--t-span", dest="t_span", type=float)
    sub.add_parser("verify", parents=[common], help="check derivative tables and identities")
    p = sub.add_parser("mesh", parents=[common], help="write the reconstructed surface as OBJ")
    p.add_argument("--snapshot", metavar="NPZ")
    return parser


def _thread_limit():
    raw = os.environ.get("ROCFLOW_THREADS")
    if not raw:
        return contextlib.nullcontext()
    try:
        n = int(raw)
        if n < 1:
            raise ValueError
    except ValueError:
        raise ConfigError(f"ROCFLOW_THREADS must be a positive integer, got {raw!r}") from None
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def _dispatch(args) -> int:
    cfg = resolve_config(args)
    with _thread_limit():
        if args.command == "simulate":
            return cmd_simulate(cfg)
        if args.command == "roc":
            return cmd_roc(cfg, args.snapshot)
        if args.command == "flowlines":
            return cmd_flowlines(cfg, args.through)
        if args.command == "ode":
            return cmd_ode(cfg)
        if args.command == "verify":
            return cmd_verify(cfg)
        return cmd_mesh(cfg, args.snapshot)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _dispatch(args)
    except (ConfigError, ExpressionSyntaxError) as exc:
        print(f"rocflow: {exc.code}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Abort as exc:
        print(f"rocflow: {exc.code}: {exc}", file=sys.stderr)
        return EXIT_ABORT
    except RocflowError as exc:
        # parameter errors are configuration errors, everything else aborts the run
        code = EXIT_CONFIG if exc.code in ("BadParams",) else EXIT_ABORT
        print(f"rocflow: {exc.code}: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
