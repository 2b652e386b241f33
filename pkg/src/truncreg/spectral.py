"""Right-hand sides with a vanishing low-frequency band or vanishing moments.

The transform box is the grid's cube taken as periodic: the last node along
every axis duplicates the first, so the DFT runs over the first ``n - 1``
nodes (period R, frequencies 2 pi k / R).
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .errors import CutoffAboveNyquist, IllConditionedMoments
from .grid import GridFunction

MAX_MOMENT_ORDER = 4


def _periodic_part(g: GridFunction) -> np.ndarray:
    return g.values[(slice(0, -1),) * g.grid.dim]


def _rewrap(grid, core: np.ndarray) -> np.ndarray:
    return np.pad(core, [(0, 1)] * grid.dim, mode="wrap")


def frequency_norms(grid) -> np.ndarray:
    """|omega| for every rfftn coefficient of the periodic box."""
    m = grid.n - 1
    axes = [2 * math.pi * np.fft.fftfreq(m, d=grid.h)] * (grid.dim - 1)
    axes.append(2 * math.pi * np.fft.rfftfreq(m, d=grid.h))
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.sqrt(sum(w * w for w in mesh))


def band_filter(g: GridFunction, omega0: float) -> GridFunction:
    """Zero every Fourier coefficient with |omega| <= omega0."""
    grid = g.grid
    if omega0 < 0:
        raise ValueError("omega0 must be nonnegative")
    if omega0 >= math.pi / grid.h:
        raise CutoffAboveNyquist(f"omega0={omega0} is not below the Nyquist rate {math.pi / grid.h}")
    core = _periodic_part(g)
    ghat = np.fft.rfftn(core)
    ghat[frequency_norms(grid) <= omega0 * (1 + 1e-12)] = 0.0
    out = np.fft.irfftn(ghat, s=core.shape, axes=range(grid.dim))
    return GridFunction(grid, _rewrap(grid, out))


def low_band_energy(g: GridFunction, omega0: float) -> float:
    """Largest |coefficient| inside the killed band (0 after band_filter)."""
    ghat = np.fft.rfftn(_periodic_part(g))
    killed = frequency_norms(g.grid) <= omega0 * (1 + 1e-12)
    return float(np.max(np.abs(ghat[killed]), initial=0.0))


def multi_indices(dim: int, k: int) -> list:
    """All gamma with |gamma| <= k, ordered by degree then lexicographically (descending)."""
    out = []
    for deg in range(k + 1):
        out.extend(sorted((g for g in itertools.product(range(deg + 1), repeat=dim) if sum(g) == deg), reverse=True))
    return out


def moments(g: GridFunction, k: int) -> np.ndarray:
    """Lumped-quadrature moments h^d sum_j g_j x_j^gamma, ordered as multi_indices."""
    if not 0 <= k <= MAX_MOMENT_ORDER:
        raise ValueError(f"moment order must be in 0..{MAX_MOMENT_ORDER}")
    grid = g.grid
    hd = grid.h ** grid.dim
    x = grid.coords
    out = []
    for gamma in multi_indices(grid.dim, k):
        vals = g.values
        for ax, p in enumerate(gamma):
            shape = [1] * grid.dim
            shape[ax] = -1
            vals = vals * (x ** p).reshape(shape)
        out.append(hd * vals.sum())
    return np.array(out)


def _hermite_e(p: int, s: np.ndarray) -> np.ndarray:
    # probabilists' Hermite: d^p/ds^p exp(-s^2/2) = (-1)^p He_p(s) exp(-s^2/2)
    return np.polynomial.hermite_e.hermeval(s, [0] * p + [1])


def gaussian_templates(grid, k: int, sigma: float | None = None) -> list:
    """(-1)^|gamma| / gamma! * d^gamma of a centred Gaussian, one array per gamma."""
    sigma = sigma if sigma is not None else grid.side / 10
    s = grid.coords / sigma
    base1d = np.exp(-0.5 * s * s) / (math.sqrt(2 * math.pi) * sigma)
    temps = []
    for gamma in multi_indices(grid.dim, k):
        t = np.ones(grid.shape)
        for ax, p in enumerate(gamma):
            shape = [1] * grid.dim
            shape[ax] = -1
            deriv = _hermite_e(p, s) * base1d / sigma ** p  # (-1)^p d^p/dx^p
            t = t * (deriv / math.factorial(p)).reshape(shape)
        temps.append(t)
    return temps


def remove_moments(g: GridFunction, k: int, sigma: float | None = None) -> GridFunction:
    """Subtract Gaussian-derivative templates so all moments of order <= k vanish."""
    grid = g.grid
    temps = gaussian_templates(grid, k, sigma)
    gram = np.column_stack([moments(GridFunction(grid, t), k) for t in temps])
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > 1e8:
        raise IllConditionedMoments(f"template moment matrix has condition {cond:.3e}")
    c = np.linalg.solve(gram, moments(g, k))
    out = g.values - sum(ci * t for ci, t in zip(c, temps))
    # one refinement sweep against round-off
    c2 = np.linalg.solve(gram, moments(GridFunction(grid, out), k))
    out = out - sum(ci * t for ci, t in zip(c2, temps))
    return GridFunction(grid, out)
