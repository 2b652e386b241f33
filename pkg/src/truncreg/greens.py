"""Discrete Green's-function probes (elliptic and parabolic)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assemble import assemble
from .errors import InsufficientRange
from .expm import ExpmConfig, expm_apply
from .grid import Grid, GridFunction, GridSpec, align_onto, build_grid
from .linsolve import SolverConfig, cg_solve


@dataclass
class GreensProbe:
    y: tuple  # lattice index of the source node
    values: GridFunction
    kind: str  # "elliptic" or "parabolic"
    t: float | None = None

    @property
    def mass(self) -> float:
        g = self.values.grid
        return float(g.h ** g.dim * self.values.values.sum())


@dataclass
class Fit:
    slope: float
    intercept: float
    r2: float
    npoints: int


def discrete_delta(grid: Grid, y) -> np.ndarray:
    e = np.zeros(grid.shape)
    e[tuple(y)] = 1.0 / grid.h ** grid.dim
    return grid.interior(e)


def _check_interior(grid: Grid, y):
    if len(y) != grid.dim or any(not 0 < j < grid.n - 1 for j in y):
        raise ValueError(f"source node {y} is not an interior node")


def elliptic_green(op, grid: Grid, y, solver: SolverConfig = SolverConfig(rel_tol=1e-12)) -> GreensProbe:
    """Solve A G = e_y / h^d with zero Dirichlet data."""
    y = tuple(int(j) for j in y)
    _check_interior(grid, y)
    G, _ = cg_solve(op, discrete_delta(grid, y), solver)
    return GreensProbe(y, GridFunction(grid, grid.embed(G)), "elliptic")


def heat_kernel_probe(op, grid: Grid, y, t: float, cfg: ExpmConfig = ExpmConfig(rel_tol=1e-11)) -> GreensProbe:
    y = tuple(int(j) for j in y)
    _check_interior(grid, y)
    G = expm_apply(op, discrete_delta(grid, y), t, cfg)
    return GreensProbe(y, GridFunction(grid, grid.embed(G)), "parabolic", t)


def ordering_check(coeff, dim: int, rho: int, R_small: float, R_large: float, y=None,
                   solver: SolverConfig = SolverConfig(rel_tol=1e-12)) -> dict:
    """max over common nodes of G_small - G_large (<= 0 by the maximum principle)."""
    y_point = np.zeros(dim) if y is None else np.asarray(y, dtype=float)
    grids = [build_grid(GridSpec(dim, R, rho)) for R in (R_small, R_large)]
    probes = [elliptic_green(assemble(g, coeff), g, g.index_of(y_point), solver) for g in grids]
    small = probes[0].values
    large = align_onto(probes[1].values, grids[0])
    diff = small.values - large.values
    violation = float(diff.max())
    scale = float(np.abs(large.values).max())
    return {
        "max_violation": violation,
        "relative_violation": violation / scale,
        "passed": violation <= 10 * solver.rel_tol * scale,
    }


def ray_samples(probe: GreensProbe, r_min: float, r_max: float):
    """(distance, value) along the 2d axis rays from the source node."""
    grid = probe.values.grid
    dist, vals = [], []
    for ax in range(grid.dim):
        for step in (1, -1):
            idx = list(probe.y)
            k = 1
            while 0 < idx[ax] + step * k < grid.n - 1:
                r = k * grid.h
                if r > r_max * (1 + 1e-12):
                    break
                if r >= r_min * (1 - 1e-12):
                    j = list(idx)
                    j[ax] += step * k
                    dist.append(r)
                    vals.append(probe.values.values[tuple(j)])
                k += 1
    return np.array(dist), np.array(vals)


def _linfit(x, y) -> Fit:
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    ss = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid ** 2) / ss if ss > 0 else 1.0
    return Fit(float(coef[0]), float(coef[1]), float(r2), len(x))


def elliptic_decay_fit(probe: GreensProbe, r_min: float | None = None, r_max: float | None = None) -> Fit:
    """Slope of log G versus log |x - y| on the axis rays (expected -(d-2))."""
    grid = probe.values.grid
    r_min = 3 * grid.h if r_min is None else r_min
    r_max = grid.side / 8 if r_max is None else r_max
    dist, vals = ray_samples(probe, r_min, r_max)
    keep = vals > 0
    if keep.sum() < 8:
        raise InsufficientRange(f"only {int(keep.sum())} usable fit points in [{r_min}, {r_max}]")
    return _linfit(np.log(dist[keep]), np.log(vals[keep]))


def heat_envelope_fit(probe: GreensProbe, r_max: float | None = None, floor: float = 1e-10) -> Fit:
    """Slope of log G versus |x - y|^2 / (4 t); equals -1/c for a = c in free space."""
    grid = probe.values.grid
    r_max = grid.side / 4 if r_max is None else r_max
    dist, vals = ray_samples(probe, 0.0, r_max)
    keep = vals > floor * vals.max()
    if keep.sum() < 4:
        raise InsufficientRange("too few positive samples for the envelope fit")
    return _linfit(dist[keep] ** 2 / (4 * probe.t), np.log(vals[keep]))


def probe_csv(probe: GreensProbe, r_max: float | None = None) -> str:
    grid = probe.values.grid
    dist, vals = ray_samples(probe, grid.h, grid.side if r_max is None else r_max)
    order = np.argsort(dist, kind="stable")
    lines = ["distance,G"] + [f"{dist[i]:.17g},{vals[i]:.17g}" for i in order]
    return "\n".join(lines) + "\n"
