"""Jacobi-preconditioned conjugate gradients and a dense Cholesky oracle."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ConfigError, DimMismatch, NonConvergence, SingularOperator, TooLarge

DENSE_CAP = 2000


@dataclass(frozen=True)
class SolverConfig:
    rel_tol: float = 1e-10
    max_iter: int | None = None
    preconditioner: str = "jacobi"

    def __post_init__(self):
        if not 0 < self.rel_tol < 1:
            raise ConfigError("solver.rel_tol must lie in (0, 1)")
        if self.max_iter is not None and self.max_iter < 1:
            raise ConfigError("solver.max_iter must be >= 1")
        if self.preconditioner not in ("none", "jacobi"):
            raise ConfigError(f"solver.preconditioner: unknown {self.preconditioner!r}")

    def iteration_cap(self, op) -> int:
        if self.max_iter is not None:
            return self.max_iter
        grid = op.grid
        per_axis = op.n_int ** (1.0 / grid.dim)
        return int(max(100, 10 * per_axis * grid.spec.nodes_per_unit * grid.side))

    @classmethod
    def from_dict(cls, d: dict | None) -> "SolverConfig":
        d = dict(d or {})
        return cls(
            rel_tol=float(d.get("rel_tol", 1e-10)),
            max_iter=None if d.get("max_iter") is None else int(d["max_iter"]),
            preconditioner=str(d.get("preconditioner", "jacobi")).lower(),
        )


@dataclass(frozen=True)
class SolveStats:
    iterations: int
    final_relative_residual: float
    elapsed: float


def cg_solve(op, b: np.ndarray, cfg: SolverConfig = SolverConfig(), x0=None):
    """Solve ``op @ x = b``; ``op`` needs ``apply`` and ``diagonal``.

    The stopping test uses the unpreconditioned residual 2-norm and is
    re-verified with an explicit residual before returning.
    """
    t0 = time.perf_counter()
    b = np.asarray(b, dtype=float)
    if b.shape != (op.n_int,):
        raise DimMismatch(f"rhs length {b.shape} != {op.n_int}")
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros_like(b), SolveStats(0, 0.0, time.perf_counter() - t0)
    target = cfg.rel_tol * bnorm
    cap = cfg.iteration_cap(op)
    inv_diag = 1.0 / op.diagonal() if cfg.preconditioner == "jacobi" else None

    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    r = b - op.apply(x) if x0 is not None else b.copy()
    it = 0
    while True:
        # restart from the true residual each pass (residual replacement)
        z = r * inv_diag if inv_diag is not None else r
        p = z.copy()
        rz = r @ z
        rnorm = np.linalg.norm(r)
        while rnorm > target and it < cap:
            q = op.apply(p)
            alpha = rz / (p @ q)
            x += alpha * p
            r -= alpha * q
            it += 1
            rnorm = np.linalg.norm(r)
            z = r * inv_diag if inv_diag is not None else r
            rz_new = r @ z
            p *= rz_new / rz
            p += z
            rz = rz_new
        r = b - op.apply(x)
        true = np.linalg.norm(r)
        if not np.isfinite(true):
            raise NonConvergence(float("nan"), it)
        if true <= target:
            return x, SolveStats(it, true / bnorm, time.perf_counter() - t0)
        if it >= cap:
            raise NonConvergence(true / bnorm, it)


def dense_solve(op, b: np.ndarray) -> np.ndarray:
    if op.n_int > DENSE_CAP:
        raise TooLarge(f"dense_solve supports n_int <= {DENSE_CAP}, got {op.n_int}")
    b = np.asarray(b, dtype=float)
    if b.shape != (op.n_int,):
        raise DimMismatch(f"rhs length {b.shape} != {op.n_int}")
    try:
        factor = scipy.linalg.cho_factor(op.to_dense())
    except np.linalg.LinAlgError as exc:
        raise SingularOperator(f"Cholesky failed: {exc}") from None
    return scipy.linalg.cho_solve(factor, b)
