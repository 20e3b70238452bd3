"""Coefficient reconstruction for u_tt = div(c grad u) from single-face boundary data."""
from .fields import BoundaryTrace, CoefficientField, NoiseSpec, phantom
from .forward import InitialCondition, SourceSpec, TimeAxis, forward_solve
from .geometry import BoxDomain, Grid, build_grid
from .objective import TikhonovSpec, postprocess
from .optimizer import CgConfig, InversionProblem, run

__version__ = "0.1.0"

__all__ = [
    "BoundaryTrace",
    "BoxDomain",
    "CgConfig",
    "CoefficientField",
    "Grid",
    "InitialCondition",
    "InversionProblem",
    "NoiseSpec",
    "SourceSpec",
    "TikhonovSpec",
    "TimeAxis",
    "build_grid",
    "forward_solve",
    "phantom",
    "postprocess",
    "run",
]
