"""Bubble-mesh-zoom finite elements for convection-dominated convection-diffusion."""
from .assembly import MethodConfig, solve, solve_discrete
from .grid import GridSpec, build_mesh
from .norms import error_norms, eoc, manufactured, max_value

__all__ = ["GridSpec", "MethodConfig", "build_mesh", "eoc", "error_norms", "manufactured",
           "max_value", "solve", "solve_discrete"]
__version__ = "0.1.0"
