"""Tensor-product node lattices on cubes K_R = (-R/2, R/2)^d."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyWindow, InvalidSpec, NotNested


@dataclass(frozen=True)
class GridSpec:
    dim: int
    side: float
    nodes_per_unit: int

    @property
    def n_per_axis(self) -> int:
        # round half up
        return int(math.floor(self.nodes_per_unit * self.side + 0.5)) + 1

    @property
    def h(self) -> float:
        return self.side / (self.n_per_axis - 1)

    def to_dict(self) -> dict:
        return {"dim": self.dim, "side": self.side, "nodes_per_unit": self.nodes_per_unit}

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpec":
        try:
            return cls(int(d["dim"]), float(d["side"]), int(d["nodes_per_unit"]))
        except KeyError as exc:
            raise InvalidSpec(f"grid: missing key {exc.args[0]!r}") from None


@dataclass(frozen=True, eq=False)
class Grid:
    """Node lattice. ``coords`` is shared by every axis."""

    spec: GridSpec
    coords: np.ndarray
    h: float
    _mesh: list = field(default_factory=list, repr=False, compare=False)

    @property
    def dim(self) -> int:
        return self.spec.dim

    @property
    def n(self) -> int:
        return len(self.coords)

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.dim

    @property
    def interior_shape(self) -> tuple:
        return (self.n - 2,) * self.dim

    @property
    def n_int(self) -> int:
        return (self.n - 2) ** self.dim

    @property
    def side(self) -> float:
        return float(self.coords[-1] - self.coords[0])

    def mesh(self) -> list:
        """Coordinate arrays (``indexing='ij'``), cached."""
        if not self._mesh:
            self._mesh.extend(np.meshgrid(*([self.coords] * self.dim), indexing="ij"))
        return self._mesh

    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        for ax in range(self.dim):
            idx = [slice(None)] * self.dim
            idx[ax] = 0
            mask[tuple(idx)] = True
            idx[ax] = -1
            mask[tuple(idx)] = True
        return mask

    def interior(self, values: np.ndarray) -> np.ndarray:
        """Flat interior vector (row-major) of a full nodal array."""
        return np.ascontiguousarray(values[(slice(1, -1),) * self.dim]).ravel()

    def embed(self, u_int: np.ndarray, boundary: np.ndarray | None = None) -> np.ndarray:
        """Full nodal array from an interior vector; boundary from ``boundary`` or 0."""
        full = np.zeros(self.shape) if boundary is None else np.array(boundary, dtype=float)
        full[(slice(1, -1),) * self.dim] = np.reshape(u_int, self.interior_shape)
        return full

    def index_of(self, point) -> tuple:
        """Lattice index of the node at ``point`` (must coincide with a node)."""
        point = np.broadcast_to(np.asarray(point, dtype=float), (self.dim,))
        out = []
        for x in point:
            j = int(np.argmin(np.abs(self.coords - x)))
            if abs(self.coords[j] - x) > 1e-9 * self.h:
                raise InvalidSpec(f"point {x} is not a lattice node")
            out.append(j)
        return tuple(out)


@dataclass(frozen=True, eq=False)
class GridFunction:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != self.grid.shape:
            raise InvalidSpec(f"values shape {self.values.shape} != grid shape {self.grid.shape}")

    def __add__(self, other):
        return GridFunction(self.grid, self.values + _vals(other))

    def __sub__(self, other):
        return GridFunction(self.grid, self.values - _vals(other))

    def __mul__(self, c):
        return GridFunction(self.grid, self.values * c)

    __rmul__ = __mul__


def _vals(x):
    return x.values if isinstance(x, GridFunction) else x


def _lattice_coords(n: int, h: float) -> np.ndarray:
    # symmetric construction: identical floats at coincident nodes of nested grids
    return (np.arange(n) - (n - 1) / 2.0) * h


def build_grid(spec: GridSpec) -> Grid:
    if spec.dim not in (1, 2, 3):
        raise InvalidSpec(f"dim must be 1, 2 or 3, got {spec.dim}")
    if not spec.side > 0:
        raise InvalidSpec(f"side must be positive, got {spec.side}")
    if spec.nodes_per_unit < 1:
        raise InvalidSpec("nodes_per_unit must be a positive integer")
    n = spec.n_per_axis
    if n < 3:
        raise InvalidSpec(f"grid has {n} nodes per axis, need at least 3")
    h = spec.h
    return Grid(spec, _lattice_coords(n, h), h)


def _subgrid(grid: Grid, lo: int, n: int) -> Grid:
    coords = grid.coords[lo:lo + n]
    spec = GridSpec(grid.dim, float(coords[-1] - coords[0]), grid.spec.nodes_per_unit)
    return Grid(spec, coords, grid.h)


def restrict_window(u: GridFunction, L: float) -> GridFunction:
    """Restriction to the nodes with every |x_i| <= L/2."""
    grid = u.grid
    tol = 1e-9 * grid.h
    inside = np.flatnonzero(np.abs(grid.coords) <= L / 2 + tol)
    if inside.size == 0:
        raise EmptyWindow(f"no nodes with |x| <= {L / 2}")
    lo, n = int(inside[0]), inside.size
    sub = _subgrid(grid, lo, n)
    return GridFunction(sub, u.values[(slice(lo, lo + n),) * grid.dim].copy())


def l2_norm(u) -> float:
    """Lumped-quadrature L2 norm sqrt(h^d sum u_j^2) over all included nodes."""
    if isinstance(u, GridFunction):
        return float(np.sqrt(u.grid.h ** u.grid.dim * np.sum(u.values ** 2)))
    raise TypeError("l2_norm expects a GridFunction")


def align_onto(u_big: GridFunction, target: Grid) -> GridFunction:
    """Copy ``u_big``'s values at the nodes of the (nested) ``target`` grid."""
    big = u_big.grid
    if big.dim != target.dim or not math.isclose(big.h, target.h, rel_tol=1e-12):
        raise NotNested("grids differ in dimension or spacing")
    lo = int(np.argmin(np.abs(big.coords - target.coords[0])))
    n = target.n
    if lo + n > big.n:
        raise NotNested("target grid extends beyond the source grid")
    if np.max(np.abs(big.coords[lo:lo + n] - target.coords)) > 1e-9 * big.h:
        raise NotNested("node sets do not coincide")
    return GridFunction(target, u_big.values[(slice(lo, lo + n),) * big.dim].copy())
