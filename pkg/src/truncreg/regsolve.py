"""End-to-end solvers: naive truncation, exponential regularisation, exact-Dirichlet."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import field as fld
from .assemble import DirichletData, DiscreteOperator, HomogeneousDirichlet, apply_bc, assemble
from .errors import ConfigError, InvalidGeometry
from .expm import ExpmConfig, ExpmInfo, expm_apply
from .grid import Grid, GridFunction, GridSpec, build_grid
from .linsolve import SolverConfig, SolveStats, cg_solve


@dataclass(frozen=True)
class Naive:
    pass


@dataclass(frozen=True)
class Regularized:
    T: float

    def __post_init__(self):
        if not self.T > 0:
            raise ConfigError("method.T must be positive for the regularized method")


@dataclass(frozen=True)
class ExactDirichlet:
    solution: object


@dataclass(frozen=True)
class SolveRequest:
    grid: GridSpec
    coefficient: object
    source: object
    method: object
    solver: SolverConfig = field(default_factory=SolverConfig)
    expm: ExpmConfig = field(default_factory=ExpmConfig)


@dataclass
class SolveResult:
    u: GridFunction
    stats: SolveStats
    T: float | None
    wall_time: float
    expm_info: ExpmInfo | None = None


def choose_T(R: float, L: float, alpha: float, beta: float) -> float:
    """T = |R - L| / (2 pi sqrt(alpha beta))."""
    if not (R > 0 and L > 0):
        raise InvalidGeometry("R and L must be positive")
    if L >= R:
        raise InvalidGeometry(f"window side L={L} must be smaller than R={R}")
    if not 0 < alpha <= beta:
        raise InvalidGeometry("need 0 < alpha <= beta")
    return abs(R - L) / (2 * math.pi * math.sqrt(alpha * beta))


# ---------------------------------------------------------------------------
# vector-level kernels (reused by the experiment harness with a prebuilt operator)


def solve_naive_vec(op: DiscreteOperator, g: GridFunction, solver: SolverConfig):
    return cg_solve(op, apply_bc(op, HomogeneousDirichlet(), g), solver)


def regularized_rhs(op: DiscreteOperator, g_int: np.ndarray, T: float, cfg: ExpmConfig, info=None):
    return g_int - expm_apply(op, g_int, T, cfg, info)


def solve_regularized_vec(op, g: GridFunction, T: float, solver: SolverConfig, cfg: ExpmConfig):
    info = ExpmInfo()
    r = regularized_rhs(op, op.grid.interior(g.values), T, cfg, info)
    u, stats = cg_solve(op, r, solver)
    return u, stats, info


# ---------------------------------------------------------------------------
# request-level API


def _setup(req: SolveRequest):
    grid = build_grid(req.grid)
    op = assemble(grid, req.coefficient)
    g = fld.build_source(req.source, req.coefficient, grid)
    return grid, op, g


def naive_solve(req: SolveRequest) -> SolveResult:
    if not isinstance(req.method, Naive):
        raise ConfigError("naive_solve requires method=Naive")
    t0 = time.perf_counter()
    grid, op, g = _setup(req)
    u, stats = solve_naive_vec(op, g, req.solver)
    return SolveResult(GridFunction(grid, grid.embed(u)), stats, None, time.perf_counter() - t0)


def regularized_solve(req: SolveRequest) -> SolveResult:
    if not isinstance(req.method, Regularized):
        raise ConfigError("regularized_solve requires method=Regularized(T)")
    t0 = time.perf_counter()
    grid, op, g = _setup(req)
    u, stats, info = solve_regularized_vec(op, g, req.method.T, req.solver, req.expm)
    return SolveResult(GridFunction(grid, grid.embed(u)), stats, req.method.T, time.perf_counter() - t0, info)


def exact_dirichlet_solve(req: SolveRequest) -> SolveResult:
    if not isinstance(req.method, ExactDirichlet):
        raise ConfigError("exact_dirichlet_solve requires method=ExactDirichlet(solution)")
    t0 = time.perf_counter()
    grid = build_grid(req.grid)
    op = assemble(grid, req.coefficient)
    sol = req.method.solution
    g = fld.stencil_source(sol, req.coefficient, grid)
    exact = fld.sample(sol, grid)
    b = apply_bc(op, DirichletData(exact), g)
    u, stats = cg_solve(op, b, req.solver)
    full = grid.embed(u, boundary=np.where(grid.boundary_mask(), exact.values, 0.0))
    return SolveResult(GridFunction(grid, full), stats, None, time.perf_counter() - t0)


def solve(req: SolveRequest) -> SolveResult:
    if isinstance(req.method, Naive):
        return naive_solve(req)
    if isinstance(req.method, Regularized):
        return regularized_solve(req)
    if isinstance(req.method, ExactDirichlet):
        return exact_dirichlet_solve(req)
    raise ConfigError(f"unknown method {req.method!r}")


def grid_of(req: SolveRequest) -> Grid:
    return build_grid(req.grid)
