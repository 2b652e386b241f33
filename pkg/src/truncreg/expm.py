"""Action of exp(-T A) on a vector, and the Crank-Nicolson parabolic oracle.

``expm_apply`` runs symmetric Lanczos (full reorthogonalisation) on the current
state and advances it through adaptive substeps tau_1 + tau_2 + ... = T. The
Krylov basis of a substep does not depend on tau, so a rejected step only
recomputes the small tridiagonal exponential.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ConfigError, NonFiniteBreakdown, SubstepLimit, TooLarge
from .linsolve import DENSE_CAP, SolverConfig, cg_solve


@dataclass(frozen=True)
class ExpmConfig:
    krylov_dim: int = 40
    rel_tol: float = 1e-9
    max_substeps: int = 10_000

    def __post_init__(self):
        if self.krylov_dim < 2:
            raise ConfigError("expm.krylov_dim must be >= 2")
        if not 0 < self.rel_tol < 1:
            raise ConfigError("expm.rel_tol must lie in (0, 1)")

    @classmethod
    def from_dict(cls, d: dict | None) -> "ExpmConfig":
        d = dict(d or {})
        return cls(
            krylov_dim=int(d.get("krylov_dim", 40)),
            rel_tol=float(d.get("rel_tol", 1e-9)),
            max_substeps=int(d.get("max_substeps", 10_000)),
        )


@dataclass
class ExpmInfo:
    substeps: int = 0
    rejected: int = 0
    matvecs: int = 0
    error_estimate: float = 0.0


def _lanczos(op, v, m):
    """m-step Lanczos from unit vector v with full reorthogonalisation.

    Returns (V, alpha, beta): V has k <= m rows, alpha/beta the tridiagonal
    entries, beta[k-1] the residual coupling to the next Lanczos vector.
    """
    n = v.size
    m = min(m, n)
    V = np.empty((m, n))
    alpha = np.zeros(m)
    beta = np.zeros(m)
    V[0] = v
    for j in range(m):
        w = op.apply(V[j])
        alpha[j] = V[j] @ w
        w -= alpha[j] * V[j]
        if j > 0:
            w -= beta[j - 1] * V[j - 1]
        before = np.linalg.norm(w)
        w -= V[: j + 1].T @ (V[: j + 1] @ w)
        b = np.linalg.norm(w)
        if b < 0.7 * before:
            # second classical Gram-Schmidt pass ("twice is enough")
            w -= V[: j + 1].T @ (V[: j + 1] @ w)
            b = np.linalg.norm(w)
        if not np.isfinite(b):
            raise NonFiniteBreakdown("non-finite value in Lanczos recurrence")
        beta[j] = b
        if b <= 1e-13 * max(1.0, abs(alpha[j])):
            # invariant subspace: the Krylov approximation is exact
            beta[j] = 0.0
            return V[: j + 1], alpha[: j + 1], beta[: j + 1]
        if j + 1 < m:
            V[j + 1] = w / b
    return V, alpha, beta


def _tridiag_eig(alpha, beta):
    if alpha.size == 1:
        return alpha.copy(), np.ones((1, 1))
    return scipy.linalg.eigh_tridiagonal(alpha, beta[:-1])


def _exp_e1(lam, Q, tau):
    """exp(-tau H) e_1 from the eigendecomposition of H."""
    return Q @ (np.exp(-tau * lam) * Q[0])


_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


def _residual_bound(lam, Q, beta_next, tau):
    """Bound on ||exp(-tau A) v - V exp(-tau H) e_1|| for unit v.

    The Krylov residual at time s is -beta_next [exp(-sH) e_1]_last v_next;
    propagating it with the contractive semigroup bounds the error by
    beta_next * int_0^tau |[exp(-sH) e_1]_last| ds. The integral is evaluated
    with Gauss-Legendre on geometrically graded panels (the integrand behaves
    like s^(m-1) near 0 and may vary on the scale 1/lam_max).
    """
    c = Q[-1] * Q[0]
    edges = tau * np.concatenate([[0.0], 2.0 ** -np.arange(40, -1, -1)])
    a, b = edges[:-1], edges[1:]
    s = (0.5 * (b - a))[:, None] * _GL_X[None, :] + (0.5 * (a + b))[:, None]
    f = np.exp(-np.multiply.outer(s, lam)) @ c
    integral = float(np.sum(0.5 * (b - a) * (np.abs(f) @ _GL_W)))
    return beta_next * integral


def expm_apply(op, g: np.ndarray, T: float, cfg: ExpmConfig = ExpmConfig(), info: ExpmInfo | None = None):
    """y = exp(-T A) g with ||y - y_exact|| <= rel_tol ||g|| (a-posteriori controlled)."""
    if T < 0:
        raise ConfigError("T must be nonnegative")
    y = np.array(g, dtype=float)
    if T == 0:
        return y
    info = info if info is not None else ExpmInfo()
    gnorm = np.linalg.norm(y)
    if gnorm == 0.0:
        return y
    budget = cfg.rel_tol * gnorm
    t = 0.0
    tau = T
    while t < T * (1 - 1e-15):
        if info.substeps >= cfg.max_substeps:
            raise SubstepLimit(f"exceeded {cfg.max_substeps} substeps at t={t:.3g} of T={T:.3g}")
        beta0 = np.linalg.norm(y)
        if beta0 == 0.0:
            return y
        V, a, b = _lanczos(op, y / beta0, cfg.krylov_dim)
        info.matvecs += len(a)
        lam, Q = _tridiag_eig(a, b)
        tau = min(tau, T - t)
        while True:
            err = beta0 * _residual_bound(lam, Q, b[-1], tau)
            allowed = budget * tau / T
            if err <= allowed or tau <= T * 1e-14:
                break
            tau *= 0.5
            info.rejected += 1
        coeffs = _exp_e1(lam, Q, tau)
        if not np.all(np.isfinite(coeffs)):
            raise NonFiniteBreakdown("non-finite tridiagonal exponential")
        y = beta0 * (V.T @ coeffs)
        t += tau
        info.substeps += 1
        info.error_estimate += err
        if err < 0.05 * allowed:
            tau *= 2.0
    return y


def expm_dense(op, g: np.ndarray, T: float) -> np.ndarray:
    if op.n_int > DENSE_CAP:
        raise TooLarge(f"expm_dense supports n_int <= {DENSE_CAP}, got {op.n_int}")
    lam, V = np.linalg.eigh(op.to_dense())
    return V @ (np.exp(-T * lam) * (V.T @ np.asarray(g, dtype=float)))


@dataclass
class ParabolicTrace:
    w_final: np.ndarray
    u_T: np.ndarray
    energy_history: np.ndarray  # ||w(t_k)||_h, k = 0..steps
    dissipation: float  # tau * sum_k <A w_{k+1/2}, w_{k+1/2}>_h
    steps: int
    tau: float
    cg_iterations: int = 0
    times: np.ndarray = field(default=None, repr=False)

    def energy_csv(self) -> str:
        lines = ["t,l2_norm"]
        lines += [f"{t:.17g},{e:.17g}" for t, e in zip(self.times, self.energy_history)]
        return "\n".join(lines) + "\n"


class _Shifted:
    """I + c A, for the implicit Crank-Nicolson solve."""

    def __init__(self, op, c):
        self.op, self.c = op, c
        self.grid, self.n_int = op.grid, op.n_int
        self._diag = 1.0 + c * op.diagonal()

    def apply(self, x):
        return x + self.c * self.op.apply(x)

    def diagonal(self):
        return self._diag


def parabolic_integrate(op, g: np.ndarray, T: float, steps: int, solver: SolverConfig | None = None) -> ParabolicTrace:
    """Crank-Nicolson for w' = -A w, w(0) = g; u_T by the trapezoid rule.

    The dissipation sum uses the CN midpoint states (w_k + w_{k+1})/2, for which
    ||w_n||^2 + 2 tau sum <A m_k, m_k> = ||g||^2 holds exactly.
    """
    if steps < 2:
        raise ConfigError("parabolic_integrate needs steps >= 2")
    solver = solver or SolverConfig(rel_tol=1e-13)
    hd = op.grid.h ** op.grid.dim
    tau = T / steps
    implicit = _Shifted(op, tau / 2)
    w = np.array(g, dtype=float)
    u = 0.5 * tau * w
    energy = [np.sqrt(hd * (w @ w))]
    dissipation = 0.0
    iters = 0
    Aw = op.apply(w)
    for k in range(steps):
        rhs = w - (tau / 2) * Aw
        w_new, stats = cg_solve(implicit, rhs, solver, x0=w)
        iters += stats.iterations
        Aw_new = op.apply(w_new)
        mid = 0.5 * (w + w_new)
        dissipation += tau * hd * (mid @ (0.5 * (Aw + Aw_new)))
        u += (0.5 if k == steps - 1 else 1.0) * tau * w_new
        w, Aw = w_new, Aw_new
        energy.append(np.sqrt(hd * (w @ w)))
    return ParabolicTrace(
        w_final=w,
        u_T=u,
        energy_history=np.array(energy),
        dissipation=float(dissipation),
        steps=steps,
        tau=tau,
        cg_iterations=iters,
        times=np.linspace(0.0, T, steps + 1),
    )
