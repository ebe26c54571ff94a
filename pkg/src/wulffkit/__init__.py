"""wulffkit: Wulff shapes, anisotropic curvatures and Minkowski-type integral formulas."""

from .anisotropy import ConvexityReport, SphereFunction, anisotropy_matrix, convexity_audit
from .curvature import CurvaturePacket, curvature_packet, elementary_symmetric, newton_operators
from .geometry import PointFrame, make_surface, point_frame, point_frames
from .integrals import build_grid, diagnostics, evaluate_grid, integrate, minkowski_residuals, verify
from .jets import Jet2
from .spec_parser import ParseError, eval_jet2, parse_fspec, parse_surfspec
from .wulff import Mesh, wulff_mesh, wulff_point, wulff_selftest

__version__ = "0.1.0"

__all__ = [
    "ConvexityReport",
    "CurvaturePacket",
    "Jet2",
    "Mesh",
    "ParseError",
    "PointFrame",
    "SphereFunction",
    "anisotropy_matrix",
    "build_grid",
    "convexity_audit",
    "curvature_packet",
    "diagnostics",
    "elementary_symmetric",
    "eval_jet2",
    "evaluate_grid",
    "integrate",
    "make_surface",
    "minkowski_residuals",
    "newton_operators",
    "parse_fspec",
    "parse_surfspec",
    "point_frame",
    "point_frames",
    "verify",
    "wulff_mesh",
    "wulff_point",
    "wulff_selftest",
]
