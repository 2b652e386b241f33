"""Self-check of the discrete invariants on small built-in instances."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import field as fld
from .assemble import DirichletData, apply_bc, assemble
from .expm import ExpmConfig, expm_apply, expm_dense, parabolic_integrate
from .greens import heat_kernel_probe, ordering_check
from .grid import GridSpec, build_grid
from .linsolve import SolverConfig, cg_solve
from .regsolve import solve_regularized_vec


@dataclass
class Check:
    name: str
    passed: bool
    value: float
    limit: float
    seconds: float = 0.0


def _matrix_free_dense(op):
    # columns from the stencil itself, so a broken apply shows up here
    n = op.n_int
    return np.column_stack([op.apply(e) for e in np.eye(n)])


def check_symmetry():
    grid = build_grid(GridSpec(2, 1.0, 8))
    M = _matrix_free_dense(assemble(grid, fld.RadialBump()))
    asym = np.abs(M - M.T).max() / np.abs(M).max()
    return asym, 1e-13


def check_positivity():
    grid = build_grid(GridSpec(2, 1.0, 8))
    M = _matrix_free_dense(assemble(grid, fld.RadialBump()))
    lam_min = np.linalg.eigvalsh(0.5 * (M + M.T)).min()
    # smallest eigenvalue must be positive; report its negative as the "violation"
    return -lam_min, 0.0


def check_expm():
    rng = np.random.default_rng(7)
    grid = build_grid(GridSpec(2, 1.0, 12))
    worst = 0.0
    for coeff in (fld.Constant(1.0), fld.RadialBump()):
        op = assemble(grid, coeff)
        for T in (0.01, 0.2):
            g = rng.standard_normal(op.n_int)
            y = expm_apply(op, g, T, ExpmConfig(rel_tol=1e-11))
            ref = expm_dense(op, g, T)
            worst = max(worst, np.linalg.norm(y - ref) / np.linalg.norm(ref))
    return worst, 1e-8


def _small_problem():
    grid = build_grid(GridSpec(2, 1.0, 10))
    coeff = fld.RadialBump()
    op = assemble(grid, coeff)
    g = fld.stencil_source(fld.Sine2DBump(), coeff, grid)
    return grid, op, g


def check_identity():
    grid, op, g = _small_problem()
    T = 0.05
    u, _, _ = solve_regularized_vec(op, g, T, SolverConfig(rel_tol=1e-13), ExpmConfig(rel_tol=1e-13))
    tr = parabolic_integrate(op, grid.interior(g.values), T, 400)
    return np.linalg.norm(u - tr.u_T) / np.linalg.norm(u), 1e-5


def check_energy():
    grid, op, g = _small_problem()
    gi = grid.interior(g.values)
    tr = parabolic_integrate(op, gi, 0.05, 50)
    incr = np.diff(tr.energy_history).max()
    g2 = grid.h ** grid.dim * (gi @ gi)
    excess = tr.dissipation / (0.5 * g2) - 1.0
    return max(incr / tr.energy_history[0], excess), 1e-12


def check_exact_dirichlet():
    grid, op, _ = _small_problem()
    sol = fld.Sine2DBump()
    exact = fld.sample(sol, grid)
    b = apply_bc(op, DirichletData(exact), fld.stencil_source(sol, fld.RadialBump(), grid))
    u, _ = cg_solve(op, b, SolverConfig(rel_tol=1e-13))
    ref = grid.interior(exact.values)
    return np.abs(u - ref).max() / np.abs(ref).max(), 1e-9


def check_green_ordering():
    res = ordering_check(fld.RadialBump(), 2, 8, 1.0, 2.0)
    return res["relative_violation"], 1e-10


def check_heat_mass():
    grid = build_grid(GridSpec(2, 1.0, 10))
    op = assemble(grid, fld.Constant(1.0))
    y = (grid.n // 2,) * 2
    masses = [heat_kernel_probe(op, grid, y, t).mass for t in (0.001, 0.01, 0.05)]
    inc = max(0.0, max(np.diff(masses)))
    return max(masses[0] - 1.0, inc), 1e-8


CHECKS = (
    ("operator symmetry", check_symmetry),
    ("operator positivity", check_positivity),
    ("expm vs dense", check_expm),
    ("elliptic/parabolic identity", check_identity),
    ("energy monotonicity", check_energy),
    ("exact-Dirichlet reproduction", check_exact_dirichlet),
    ("Green ordering", check_green_ordering),
    ("heat-kernel mass", check_heat_mass),
)


def run_checks() -> list:
    out = []
    for name, fn in CHECKS:
        t0 = time.perf_counter()
        try:
            value, limit = fn()
            passed = bool(np.isfinite(value) and value <= limit) if limit > 0 else bool(value < 0)
        except Exception as exc:  # a crash is a failed check
            value, limit, passed = float("nan"), float("nan"), False
            name = f"{name} ({type(exc).__name__})"
        out.append(Check(name, passed, float(value), float(limit), time.perf_counter() - t0))
    return out


def format_table(checks) -> str:
    width = max(len(c.name) for c in checks)
    lines = [f"{'check':<{width}}  result  value       limit"]
    for c in checks:
        lines.append(f"{c.name:<{width}}  {'PASS' if c.passed else 'FAIL'}    {c.value:<10.3e}  {c.limit:.1e}")
    return "\n".join(lines)
