"""Coefficient fields, manufactured solutions and source terms, sampled on grids.

Every catalog object is a small frozen dataclass that is callable on a list of
coordinate arrays ``xs = [x1, x2, ...]`` and returns an array of the same shape.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .errors import ConfigError
from .grid import Grid, GridFunction


def _r2(xs):
    return sum(x * x for x in xs)


def _bump(xs):
    return np.exp(1.0 / (_r2(xs) + 1.0))


# --------------------------------------------------------------------------
# coefficients


@dataclass(frozen=True)
class Constant:
    c: float = 1.0

    def __call__(self, xs):
        return np.full(np.shape(xs[0]), float(self.c))

    @property
    def alpha(self):
        return float(self.c)

    @property
    def beta(self):
        return float(self.c)


@dataclass(frozen=True)
class RadialBump:
    """a(x) = exp(1/(|x|^2 + 1)); tends to 1 at infinity, e at the origin."""

    def __call__(self, xs):
        return _bump(xs)

    alpha = 1.0
    beta = math.e


def _quasi_1d(x):
    return np.sin(2 * math.sqrt(2) * math.pi * x) + np.sin(2 * math.pi * x)


@dataclass(frozen=True)
class QuasiPeriodic:
    """a(x) = 0.25 prod_i exp(sin(2 sqrt2 pi x_i) + sin(2 pi x_i)), used in 2D."""

    scale: float = 0.25

    def __call__(self, xs):
        return self.scale * np.exp(sum(_quasi_1d(x) for x in xs[:2]))

    # infimum/supremum of the exponent, approached but not attained
    @property
    def alpha(self):
        return self.scale * math.exp(-4.0)

    @property
    def beta(self):
        return self.scale * math.exp(4.0)


@dataclass(frozen=True)
class Periodic:
    """a(x) = 1 + amplitude * prod_i cos(2 pi x_i / eps)."""

    eps: float = 0.25
    amplitude: float = 0.5

    def __post_init__(self):
        if not 0 <= self.amplitude < 1 or self.eps <= 0:
            raise ConfigError("periodic coefficient needs eps > 0 and 0 <= amplitude < 1")

    def __call__(self, xs):
        prod = np.ones(np.shape(xs[0]))
        for x in xs:
            prod = prod * np.cos(2 * math.pi * x / self.eps)
        return 1.0 + self.amplitude * prod

    @property
    def alpha(self):
        return 1.0 - self.amplitude

    @property
    def beta(self):
        return 1.0 + self.amplitude


CoefficientSpec = Union[Constant, RadialBump, QuasiPeriodic, Periodic]


# --------------------------------------------------------------------------
# manufactured solutions and closed-form sources


@dataclass(frozen=True)
class Sine3DBump:
    """(sum_i sin(2 pi x_i)) (exp(1/(|x|^2+1)) - 1)."""

    def __call__(self, xs):
        return sum(np.sin(2 * math.pi * x) for x in xs) * (_bump(xs) - 1.0)


@dataclass(frozen=True)
class Sine2DBump:
    """sin(2 pi x_1 + phase) (exp(1/(|x|^2+1)) - 1); phase 0 is the catalog form."""

    phase: float = 0.0

    def __call__(self, xs):
        return np.sin(2 * math.pi * xs[0] + self.phase) * (_bump(xs) - 1.0)


@dataclass(frozen=True)
class HighFreq2DBump:
    """sin(10 pi x_1) sin(10 pi x_2) (exp(1/(|x|^2+1)) - 1); zero on every K_{0.2n} wall."""

    def __call__(self, xs):
        return np.sin(10 * math.pi * xs[0]) * np.sin(10 * math.pi * xs[1]) * (_bump(xs) - 1.0)


@dataclass(frozen=True)
class AlgebraicDecay:
    """(1 + |x|^2)^(-1/2): Newtonian-like 1/|x| tail, source decays like |x|^-5."""

    def __call__(self, xs):
        return 1.0 / np.sqrt(1.0 + _r2(xs))


@dataclass(frozen=True)
class QuasiSource:
    """(sin(10 pi x_1) + sin(10 pi x_2)) (exp(1/(|x|^2+1)) - 1)."""

    def __call__(self, xs):
        return (np.sin(10 * math.pi * xs[0]) + np.sin(10 * math.pi * xs[1])) * (_bump(xs) - 1.0)


_EXPR_NAMES = {
    name: getattr(np, name)
    for name in ("sin", "cos", "tan", "exp", "log", "sqrt", "abs", "sinh", "cosh", "tanh", "where")
}
_EXPR_NAMES.update(pi=math.pi, e=math.e)


@dataclass(frozen=True)
class Expression:
    """Closed form given as a numpy expression in x1, x2, x3 and r2 = |x|^2."""

    expr: str

    def __post_init__(self):
        try:
            compile(self.expr, "<expr>", "eval")
        except SyntaxError as exc:
            raise ConfigError(f"bad expression {self.expr!r}: {exc.msg}") from None

    def __call__(self, xs):
        env = dict(_EXPR_NAMES)
        env.update({f"x{i + 1}": x for i, x in enumerate(xs)})
        env["r2"] = _r2(xs)
        out = eval(self.expr, {"__builtins__": {}}, env)  # noqa: S307
        return np.broadcast_to(np.asarray(out, dtype=float), np.shape(xs[0])).copy()


@dataclass(frozen=True)
class Custom:
    """Arbitrary in-process closed form ``fn(xs) -> array``."""

    fn: Callable

    def __call__(self, xs):
        return np.asarray(self.fn(xs), dtype=float)


SolutionSpec = Union[Sine3DBump, Sine2DBump, HighFreq2DBump, AlgebraicDecay, Expression, Custom]


# --------------------------------------------------------------------------
# source specs


@dataclass(frozen=True)
class FromSolution:
    solution: object


@dataclass(frozen=True)
class ClosedForm:
    fn: object


@dataclass(frozen=True)
class SpectrallyFiltered:
    base: object
    omega0: float | None = None
    moments: int | None = None


SourceSpec = Union[FromSolution, ClosedForm, SpectrallyFiltered]


# --------------------------------------------------------------------------
# operations


def sample(expr, grid: Grid) -> GridFunction:
    return GridFunction(grid, np.asarray(expr(grid.mesh()), dtype=float))


def coefficient_bounds(spec, probe_grid: Grid) -> tuple[float, float]:
    vals = spec(probe_grid.mesh())
    return float(vals.min()), float(vals.max())


def edge_midpoints(coords: np.ndarray, h: float) -> np.ndarray:
    """Midpoints between consecutive nodes; shared by assembly and source stencils."""
    return coords[:-1] + h / 2


def axis_mesh(coords_per_axis):
    return np.meshgrid(*coords_per_axis, indexing="ij")


def stencil_source(u_exact, coeff, grid: Grid) -> GridFunction:
    """g = A_h u_exact at every node, ghost neighbours taken from the closed form."""
    d, n, h = grid.dim, grid.n, grid.h
    ext = (np.arange(-1, n + 1) - (n - 1) / 2.0) * h
    mids = edge_midpoints(ext, h)
    u = u_exact(axis_mesh([ext] * d))
    g = np.zeros(grid.shape)
    for ax in range(d):
        axes = [grid.coords] * d
        axes[ax] = mids
        a = coeff(axis_mesh(axes))
        idx = [slice(1, -1)] * d
        idx[ax] = slice(None)
        flux = a * np.diff(u[tuple(idx)], axis=ax)
        g -= np.diff(flux, axis=ax)
    return GridFunction(grid, g / h ** 2)


def build_source(source, coeff, grid: Grid) -> GridFunction:
    if isinstance(source, FromSolution):
        return stencil_source(source.solution, coeff, grid)
    if isinstance(source, ClosedForm):
        return sample(source.fn, grid)
    if isinstance(source, SpectrallyFiltered):
        from . import spectral

        g = build_source(source.base, coeff, grid)
        if source.omega0 is not None:
            g = spectral.band_filter(g, source.omega0)
        if source.moments is not None:
            g = spectral.remove_moments(g, source.moments)
        return g
    raise ConfigError(f"unknown source spec {source!r}")


# --------------------------------------------------------------------------
# config parsing


def coefficient_from_dict(d: dict):
    kind = d.get("type", "constant")
    if kind == "constant":
        return Constant(float(d.get("value", 1.0)))
    if kind == "radial_bump":
        return RadialBump()
    if kind == "quasi_periodic":
        return QuasiPeriodic(float(d.get("scale", 0.25)))
    if kind == "periodic":
        return Periodic(float(d.get("eps", 0.25)), float(d.get("amplitude", 0.5)))
    raise ConfigError(f"coefficient.type: unknown variant {kind!r}")


def solution_from_dict(d: dict):
    kind = d.get("type")
    if kind == "sine3d_bump":
        return Sine3DBump()
    if kind == "sine2d_bump":
        return Sine2DBump(float(d.get("phase", 0.0)))
    if kind == "highfreq2d_bump":
        return HighFreq2DBump()
    if kind == "algebraic":
        return AlgebraicDecay()
    if kind == "expr":
        return Expression(str(d["expr"]))
    raise ConfigError(f"solution.type: unknown variant {kind!r}")


def closed_form_from_dict(d: dict):
    if "expr" in d:
        return Expression(str(d["expr"]))
    name = d.get("name")
    if name == "quasi_source":
        return QuasiSource()
    raise ConfigError(f"source: closed form needs 'expr' or a known 'name', got {name!r}")


def source_from_dict(d: dict, solution=None):
    kind = d.get("type", "from_solution")
    if kind == "from_solution":
        if solution is None:
            raise ConfigError("source.type=from_solution requires a 'solution' block")
        return FromSolution(solution)
    if kind == "closed_form":
        return ClosedForm(closed_form_from_dict(d))
    if kind == "filtered":
        base = source_from_dict(d.get("base", {"type": "from_solution"}), solution)
        omega0 = d.get("omega0")
        k = d.get("moments")
        return SpectrallyFiltered(
            base,
            None if omega0 is None else float(omega0),
            None if k is None else int(k),
        )
    raise ConfigError(f"source.type: unknown variant {kind!r}")
