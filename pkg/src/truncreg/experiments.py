"""Domain-size sweeps, error tables and decay-rate fits."""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import field as fld
from .assemble import DirichletData, apply_bc, assemble
from .errors import ConfigError, DegenerateFit, NumericalError
from .expm import ExpmConfig, expm_apply, expm_dense
from .grid import GridFunction, GridSpec, align_onto, build_grid, l2_norm, restrict_window
from .linsolve import SolverConfig, cg_solve, dense_solve
from .regsolve import choose_T, solve_naive_vec, solve_regularized_vec

EXPERIMENT_IDS = ("E-total", "E-boundary", "E-modelling", "E-quasi", "E-naive-rate")
METHODS = ("naive", "regularized", "exact_dirichlet")
CSV_COLUMNS = ("experiment_id", "R", "L", "T", "method", "error", "iterations", "residual", "seconds")
MIN_FIT_POINTS = 4


@dataclass
class ExperimentPlan:
    id: str
    dim: int
    R_values: list
    nodes_per_unit: int
    coefficient: object
    source: object
    solution: object = None
    methods: tuple = ("naive", "regularized")
    window_fraction: float = 2.0 / 3.0
    window_fixed: float | None = None
    T_policy: dict = field(default_factory=lambda: {"paper_rule": True})
    reference: dict = field(default_factory=lambda: {"type": "closed_form"})
    naive_reference: dict | None = None
    solver: SolverConfig = field(default_factory=SolverConfig)
    expm: ExpmConfig = field(default_factory=ExpmConfig)

    def __post_init__(self):
        if self.id not in EXPERIMENT_IDS:
            raise ConfigError(f"id: unknown experiment {self.id!r} (expected one of {EXPERIMENT_IDS})")
        if not self.R_values or list(self.R_values) != sorted(self.R_values):
            raise ConfigError("R_values must be a nonempty ascending list")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ConfigError(f"methods: unknown {bad}")
        if not 0 < self.window_fraction < 1:
            raise ConfigError("window.fraction must lie in (0, 1)")
        for R in self.R_values:
            if self.window(R) >= R:
                raise ConfigError(f"window side {self.window(R)} must be smaller than R={R}")
        if self.id == "E-modelling":
            for R in self.R_values:
                if abs(R / 0.2 - round(R / 0.2)) > 1e-9:
                    raise ConfigError(f"E-modelling needs R a multiple of 0.2, got {R}")
        for ref in (self.reference, self.naive_reference):
            if ref and ref.get("type") == "closed_form" and self.solution is None:
                raise ConfigError("closed_form reference requires a 'solution' block")

    def window(self, R: float) -> float:
        return self.window_fixed if self.window_fixed is not None else self.window_fraction * R

    @property
    def alpha_beta(self):
        return self.coefficient.alpha, self.coefficient.beta

    def reference_R(self):
        refs = [r for r in (self.reference, self.naive_reference) if r]
        for r in refs:
            if r.get("type") == "regularized_at_rmax":
                return float(r.get("R", max(self.R_values)))
        return None

    def T_for(self, R: float) -> float:
        pol = self.T_policy
        if "per_R" in pol:
            vals = list(pol["per_R"])
            if len(vals) != len(self.R_values):
                raise ConfigError("T_policy.per_R must have one entry per R")
            return float(vals[list(self.R_values).index(R)])
        if "fixed" in pol:
            return float(pol["fixed"])
        a, b = self.alpha_beta
        if pol.get("fixed_from_reference"):
            Rr = self.reference_R() or max(self.R_values)
            return choose_T(Rr, self.window_fraction * Rr, a, b)
        return choose_T(R, self.window(R), a, b)


@dataclass
class Row:
    experiment_id: str
    R: float
    L: float
    T: float | None
    method: str
    error: float
    iterations: int
    residual: float
    seconds: float
    excluded: bool = False


@dataclass
class ErrorReport:
    experiment_id: str
    rows: list
    fits: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def method_rows(self, method):
        return [r for r in self.rows if r.method == method]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow([
                r.experiment_id, repr(float(r.R)), repr(float(r.L)),
                "" if r.T is None else repr(float(r.T)), r.method,
                repr(float(r.error)), r.iterations, repr(float(r.residual)), f"{r.seconds:.6f}",
            ])
        return buf.getvalue()

    def fits_json(self) -> str:
        return json.dumps({"experiment_id": self.experiment_id, "fits": self.fits, "meta": self.meta}, indent=2)


# ---------------------------------------------------------------------------
# fitting


def fit_decay(xs, errs, model: str = "powerlaw") -> tuple[float, float, float]:
    """Least squares on (log x, log err) for 'powerlaw' or (x, log err) for 'exponential'."""
    xs = np.asarray(xs, dtype=float)
    errs = np.asarray(errs, dtype=float)
    if xs.size < MIN_FIT_POINTS:
        raise DegenerateFit(f"need at least {MIN_FIT_POINTS} points, got {xs.size}")
    if np.any(errs <= 0):
        raise DegenerateFit("errors must be positive")
    if np.ptp(xs) == 0:
        raise DegenerateFit("abscissae are constant")
    if model == "powerlaw":
        if np.any(xs <= 0):
            raise DegenerateFit("powerlaw fit needs positive abscissae")
        X = np.log(xs)
    elif model == "exponential":
        X = xs
    else:
        raise ValueError(f"unknown model {model!r}")
    Y = np.log(errs)
    slope, intercept = np.polyfit(X, Y, 1)
    resid = Y - (slope * X + intercept)
    ss = np.sum((Y - Y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid ** 2) / ss if ss > 0 else 1.0
    return float(slope), float(intercept), float(r2)


def _fit_block(xs, errs) -> dict:
    out = {"n": len(xs)}
    for model in ("powerlaw", "exponential"):
        try:
            s, c, r2 = fit_decay(xs, errs, model)
            out[model] = {"slope": s, "intercept": c, "r2": r2}
        except DegenerateFit as exc:
            out[model] = {"error": str(exc)}
    return out


def fit_report(report: ErrorReport, by: str = "R") -> dict:
    fits = {}
    for method in sorted({r.method for r in report.rows}):
        rows = [r for r in report.method_rows(method) if not r.excluded and r.error > 0]
        xs = [getattr(r, by) for r in rows]
        fits[method] = _fit_block(xs, [r.error for r in rows])
    return fits


# ---------------------------------------------------------------------------
# sweep


def _reference_solution(plan: ExperimentPlan, ref: dict):
    if ref.get("type") != "regularized_at_rmax":
        return None
    R = float(ref.get("R", max(plan.R_values)))
    grid = build_grid(GridSpec(plan.dim, R, plan.nodes_per_unit))
    op = assemble(grid, plan.coefficient)
    g = fld.build_source(plan.source, plan.coefficient, grid)
    T = float(ref["T"]) if "T" in ref else plan.T_for(R)
    t0 = time.perf_counter()
    u, stats, _ = solve_regularized_vec(op, g, T, plan.solver, plan.expm)
    return {"u": GridFunction(grid, grid.embed(u)), "R": R, "T": T, "seconds": time.perf_counter() - t0,
            "iterations": stats.iterations}


def _reference_on(plan, ref: dict, cache, grid):
    if ref.get("type", "closed_form") == "closed_form":
        return fld.sample(plan.solution, grid)
    return align_onto(cache["u"], grid)


def _run_R(plan: ExperimentPlan, R: float, refs: dict) -> list:
    grid = build_grid(GridSpec(plan.dim, R, plan.nodes_per_unit))
    op = assemble(grid, plan.coefficient)
    g = fld.build_source(plan.source, plan.coefficient, grid)
    L = plan.window(R)
    rows = []
    for method in plan.methods:
        t0 = time.perf_counter()
        T = None
        boundary = None
        if method == "naive":
            u, stats = solve_naive_vec(op, g, plan.solver)
            ref_spec = plan.naive_reference or plan.reference
        elif method == "regularized":
            T = plan.T_for(R)
            u, stats, _ = solve_regularized_vec(op, g, T, plan.solver, plan.expm)
            ref_spec = plan.reference
        else:
            exact = fld.sample(plan.solution, grid)
            src = fld.stencil_source(plan.solution, plan.coefficient, grid)
            u, stats = cg_solve(op, apply_bc(op, DirichletData(exact), src), plan.solver)
            boundary = np.where(grid.boundary_mask(), exact.values, 0.0)
            ref_spec = {"type": "closed_form"}
        seconds = time.perf_counter() - t0
        full = GridFunction(grid, grid.embed(u, boundary))
        ref = _reference_on(plan, ref_spec, refs.get(id(ref_spec)), grid)
        err = l2_norm(restrict_window(full - ref, L))
        excluded = False
        cache = refs.get(id(ref_spec))
        if cache is not None and math.isclose(cache["R"], R) and method == "regularized" \
                and math.isclose(cache["T"], T):
            excluded = True  # the reference compared with itself
        rows.append(Row(plan.id, R, L, T, method, err, stats.iterations,
                        stats.final_relative_residual, seconds, excluded))
    return rows


def run_plan(plan: ExperimentPlan, threads: int = 1, log=None) -> ErrorReport:
    refs = {}
    meta = {"nodes_per_unit": plan.nodes_per_unit, "dim": plan.dim}
    for ref in (plan.reference, plan.naive_reference):
        if ref and ref.get("type") == "regularized_at_rmax" and id(ref) not in refs:
            cache = _reference_solution(plan, ref)
            refs[id(ref)] = cache
            meta.setdefault("references", []).append(
                {"R": cache["R"], "T": cache["T"], "seconds": cache["seconds"], "iterations": cache["iterations"]})

    def task(R):
        try:
            rows = _run_R(plan, R, refs)
        except NumericalError as exc:
            raise NumericalError(f"{plan.id}: solve failed at R={R}: {exc}") from exc
        if log:
            for r in rows:
                log(f"{plan.id} R={R:g} {r.method}: error={r.error:.3e} ({r.seconds:.1f}s)")
        return rows

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(task, plan.R_values))
    else:
        results = [task(R) for R in plan.R_values]
    rows = [r for rs in results for r in rs]
    report = ErrorReport(plan.id, rows, meta=meta)
    report.fits = fit_report(report)
    return report


def boundary_error_isolate(plan: ExperimentPlan, threads: int = 1, log=None) -> ErrorReport:
    """Regularised rows against a regularised reference with the same fixed T."""
    if not ("fixed" in plan.T_policy or plan.T_policy.get("fixed_from_reference")):
        raise ConfigError("boundary_error_isolate needs a fixed T policy")
    if plan.reference.get("type") != "regularized_at_rmax":
        raise ConfigError("boundary_error_isolate needs reference.type = regularized_at_rmax")
    return run_plan(plan, threads, log)


def modelling_error_isolate(plan: ExperimentPlan, threads: int = 1, log=None) -> ErrorReport:
    """Regularised rows against the closed form on walls where the solution vanishes.

    Besides the per-R rows, the modelling error is re-evaluated on the largest
    grid at every row's T (method ``regularized_vs_T``), which separates the T
    dependence from the change of box.
    """
    if plan.reference.get("type") != "closed_form":
        raise ConfigError("modelling_error_isolate needs a closed_form reference")
    report = run_plan(plan, threads, log)
    R = max(plan.R_values)
    grid = build_grid(GridSpec(plan.dim, R, plan.nodes_per_unit))
    op = assemble(grid, plan.coefficient)
    g = fld.build_source(plan.source, plan.coefficient, grid)
    Ts = [plan.T_for(r) for r in plan.R_values]
    t0 = time.perf_counter()
    sweep = modelling_error_vs_T(op, g, Ts, plan.window(R), plan.solver, plan.expm)
    sec = (time.perf_counter() - t0) / len(Ts)
    for T, err in zip(Ts, sweep.errors):
        report.rows.append(Row(plan.id, R, plan.window(R), T, "regularized_vs_T", float(err), 0, 0.0, sec))
    vs_T = [r for r in report.method_rows("regularized_vs_T") if r.error > 0]
    report.fits["regularized_vs_T"] = _fit_block([r.T for r in vs_T], [r.error for r in vs_T])
    return report


def run_experiment(plan: ExperimentPlan, threads: int = 1, log=None) -> ErrorReport:
    if plan.id == "E-boundary":
        return boundary_error_isolate(plan, threads, log)
    if plan.id == "E-modelling":
        return modelling_error_isolate(plan, threads, log)
    return run_plan(plan, threads, log)


# ---------------------------------------------------------------------------
# modelling error as a function of T on one grid


@dataclass
class ModellingSweep:
    T_values: np.ndarray
    errors: np.ndarray
    dense_errors: np.ndarray | None


def modelling_error_vs_T(op, g: GridFunction, T_values, window: float,
                         solver: SolverConfig = SolverConfig(rel_tol=1e-12),
                         cfg: ExpmConfig = ExpmConfig(rel_tol=1e-12), dense: bool = False) -> ModellingSweep:
    """||u_T - u_naive|| over K_window for each T, where u_T - u_naive = -A^-1 exp(-TA) g.

    The difference is evaluated directly (no cancellation between the two solves).
    ``dense=True`` adds the eigendecomposition/Cholesky oracle alongside.
    """
    grid = op.grid
    g_int = grid.interior(g.values)
    errs, dense_errs = [], []
    for T in T_values:
        d, _ = cg_solve(op, expm_apply(op, g_int, T, cfg), solver)
        errs.append(l2_norm(restrict_window(GridFunction(grid, grid.embed(d)), window)))
        if dense:
            dd = dense_solve(op, expm_dense(op, g_int, T))
            dense_errs.append(l2_norm(restrict_window(GridFunction(grid, grid.embed(dd)), window)))
    return ModellingSweep(np.asarray(T_values, dtype=float), np.array(errs),
                          np.array(dense_errs) if dense else None)


# ---------------------------------------------------------------------------
# config parsing


def plan_from_dict(d: dict) -> ExperimentPlan:
    d = dict(d)
    d.pop("plan", None)
    try:
        exp_id = d["id"]
        dim = int(d["dim"])
        R_values = [float(r) for r in d["R_values"]]
        rho = int(d["nodes_per_unit"])
    except KeyError as exc:
        raise ConfigError(f"plan: missing key {exc.args[0]!r}") from None
    coeff = fld.coefficient_from_dict(d.get("coefficient", {"type": "constant"}))
    solution = fld.solution_from_dict(d["solution"]) if d.get("solution") else None
    source = fld.source_from_dict(d.get("source", {"type": "from_solution"}), solution)
    window = d.get("window", {})
    methods = tuple(d.get("methods", ("naive", "regularized")))
    return ExperimentPlan(
        id=exp_id,
        dim=dim,
        R_values=R_values,
        nodes_per_unit=rho,
        coefficient=coeff,
        source=source,
        solution=solution,
        methods=methods,
        window_fraction=float(window.get("fraction", 2.0 / 3.0)),
        window_fixed=None if window.get("fixed") is None else float(window["fixed"]),
        T_policy=dict(d.get("T_policy", {"paper_rule": True})),
        reference=dict(d.get("reference", {"type": "closed_form"})),
        naive_reference=dict(d["naive_reference"]) if d.get("naive_reference") else None,
        solver=SolverConfig.from_dict(d.get("solver")),
        expm=ExpmConfig.from_dict(d.get("expm")),
    )
