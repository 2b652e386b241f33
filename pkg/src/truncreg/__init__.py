"""Truncated-domain elliptic solves: naive Dirichlet truncation versus
exponential regularisation u_T = A^-1 (g - exp(-T A) g)."""

from .errors import ConfigError, NumericalError, TruncRegError
from .grid import GridFunction, GridSpec, build_grid, l2_norm, restrict_window
from .regsolve import SolveRequest, SolveResult, choose_T, solve

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "NumericalError",
    "TruncRegError",
    "GridFunction",
    "GridSpec",
    "build_grid",
    "l2_norm",
    "restrict_window",
    "SolveRequest",
    "SolveResult",
    "choose_T",
    "solve",
]
