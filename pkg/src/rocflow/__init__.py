"""Curvature flows of convex spheres through their radii of curvature."""

from .errors import (BadParams, ConeExit, ConfigError, EvalDomain, ExpressionSyntaxError, GridTooCoarse,
                     NonConvex, NonRealPsi, NotParabolic, NotUmbilic, OutOfDomain, OverlapMismatch,
                     RocflowError, UnknownIdentifier)
from .expr import flow_from_expression, jet_eval, parse_flow_expression, to_string
from .flows import CATALOG, FlowJet, FlowSpec, classify_flow, eval_jet, make_flow, parabolicity
from .geometry import (RoCField, SurfaceMesh, codazzi_residual, compute_F, compute_roc, hyperbolic_roc_area,
                       reconstruct_surface, umbilic_kappa)
from .grid import ChartGrid, SupportField, chart_normal
from .ode import RoCPoint, certificate_check, flowlines, integrate_ode, poisson_bracket
from .pde import (MonitorSeries, SimConfig, adaptive_dt, advance, pde_rhs, rocflow_rhs, run_simulation,
                  soliton_residual)

__version__ = "0.1.0"
