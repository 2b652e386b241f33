"""Conservative finite-difference operator for -div(a grad .) with Dirichlet walls.

Row j of A (interior nodes only) is

    h^-2 sum_i [ a_{j+e_i/2} (u_j - u_{j+e_i}) + a_{j-e_i/2} (u_j - u_{j-e_i}) ]

with ``a`` sampled at edge midpoints. Boundary nodes are eliminated; their
contributions move to the right-hand side through :func:`apply_bc`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import DimMismatch
from .field import axis_mesh, edge_midpoints
from .grid import Grid, GridFunction


@dataclass(frozen=True, eq=False)
class DiscreteOperator:
    grid: Grid
    edges: tuple  # per axis: a at edge midpoints, n-1 along that axis, n along the others

    @property
    def n_int(self) -> int:
        return self.grid.n_int

    @property
    def shape(self) -> tuple:
        return (self.n_int, self.n_int)

    def apply_full(self, u_full: np.ndarray) -> np.ndarray:
        """Stencil applied to a full nodal array; returns the interior block (nd)."""
        d = self.grid.dim
        out = np.zeros(self.grid.interior_shape)
        for ax, a in enumerate(self.edges):
            flux = a * np.diff(u_full, axis=ax)
            idx = [slice(1, -1)] * d
            idx[ax] = slice(None)
            out -= np.diff(flux[tuple(idx)], axis=ax)
        out /= self.grid.h ** 2
        return out

    def apply(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != (self.n_int,):
            raise DimMismatch(f"expected interior vector of length {self.n_int}, got {u.shape}")
        return self.apply_full(self.grid.embed(u)).ravel()

    __matmul__ = apply

    def diagonal(self) -> np.ndarray:
        d = self.grid.dim
        diag = np.zeros(self.grid.interior_shape)
        for ax, a in enumerate(self.edges):
            idx = [slice(1, -1)] * d
            idx[ax] = slice(None)
            a_int = a[tuple(idx)]
            lo = [slice(None)] * d
            hi = [slice(None)] * d
            lo[ax] = slice(0, -1)
            hi[ax] = slice(1, None)
            diag += a_int[tuple(lo)] + a_int[tuple(hi)]
        return diag.ravel() / self.grid.h ** 2

    def to_sparse(self) -> sp.csr_matrix:
        """Explicit CSR form (for oracles and structural checks)."""
        d, n = self.grid.dim, self.grid.n
        index = -np.ones(self.grid.shape, dtype=np.int64)
        index[(slice(1, -1),) * d] = np.arange(self.n_int).reshape(self.grid.interior_shape)
        rows, cols, vals = [], [], []
        h2 = self.grid.h ** 2
        for ax, a in enumerate(self.edges):
            lo = [slice(None)] * d
            hi = [slice(None)] * d
            lo[ax] = slice(0, n - 1)
            hi[ax] = slice(1, n)
            p, q = index[tuple(lo)].ravel(), index[tuple(hi)].ravel()
            w = a.ravel() / h2
            for s, t in ((p, q), (q, p)):
                keep = s >= 0
                rows.append(s[keep])
                cols.append(s[keep])
                vals.append(w[keep])
                both = keep & (t >= 0)
                rows.append(s[both])
                cols.append(t[both])
                vals.append(-w[both])
        rows, cols, vals = (np.concatenate(x) for x in (rows, cols, vals))
        return sp.coo_matrix((vals, (rows, cols)), shape=self.shape).tocsr()

    def to_dense(self) -> np.ndarray:
        return self.to_sparse().toarray()

    def scaled(self, c: float) -> "DiscreteOperator":
        return DiscreteOperator(self.grid, tuple(c * a for a in self.edges))


@dataclass(frozen=True, eq=False)
class HomogeneousDirichlet:
    pass


@dataclass(frozen=True, eq=False)
class DirichletData:
    values: GridFunction

    def __post_init__(self):
        if not np.all(np.isfinite(self.values.values[self.values.grid.boundary_mask()])):
            raise ValueError("Dirichlet data must be finite on boundary nodes")


def assemble(grid: Grid, coeff) -> DiscreteOperator:
    d = grid.dim
    mids = edge_midpoints(grid.coords, grid.h)
    edges = []
    for ax in range(d):
        axes = [grid.coords] * d
        axes[ax] = mids
        edges.append(np.asarray(coeff(axis_mesh(axes)), dtype=float))
    return DiscreteOperator(grid, tuple(edges))


def apply(op: DiscreteOperator, u: np.ndarray) -> np.ndarray:
    return op.apply(u)


def apply_bc(op: DiscreteOperator, bc, rhs: GridFunction) -> np.ndarray:
    """Interior right-hand side; Dirichlet data contributes a_edge u_b / h^2."""
    grid = op.grid
    if rhs.grid.shape != grid.shape:
        raise DimMismatch("rhs lives on a different grid")
    b = grid.interior(rhs.values)
    if isinstance(bc, HomogeneousDirichlet) or bc is None:
        return b
    ub = np.where(grid.boundary_mask(), bc.values.values, 0.0)
    return b - op.apply_full(ub).ravel()
