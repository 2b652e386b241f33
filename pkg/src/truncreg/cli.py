"""Command-line entry point.

Exit codes: 0 success, 1 verification failure, 2 config error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import field as fld
from .assemble import assemble
from .errors import ConfigError, NumericalError, TruncRegError
from .expm import ExpmConfig
from .greens import elliptic_decay_fit, elliptic_green, heat_envelope_fit, heat_kernel_probe, probe_csv
from .grid import GridSpec, build_grid
from .io import apply_overrides, load_config, write_field
from .linsolve import SolverConfig
from .regsolve import ExactDirichlet, Naive, Regularized, SolveRequest, choose_T, solve

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


def _grid_spec(cfg: dict) -> GridSpec:
    g = cfg.get("grid")
    if not isinstance(g, dict):
        raise ConfigError("grid: missing object with dim, side, nodes_per_unit")
    spec = GridSpec.from_dict(g)
    if spec.dim not in (1, 2, 3):
        raise ConfigError("grid.dim must be 1, 2 or 3")
    if spec.side <= 0 or spec.nodes_per_unit < 1:
        raise ConfigError("grid.side and grid.nodes_per_unit must be positive")
    return spec


def request_from_config(cfg: dict) -> SolveRequest:
    spec = _grid_spec(cfg)
    coeff = fld.coefficient_from_dict(cfg.get("coefficient", {"type": "constant"}))
    solution = fld.solution_from_dict(cfg["solution"]) if cfg.get("solution") else None
    source = fld.source_from_dict(cfg.get("source", {"type": "from_solution"}), solution)
    m = cfg.get("method", {"type": "naive"})
    kind = m.get("type", "naive")
    if kind == "naive":
        method = Naive()
    elif kind == "regularized":
        if m.get("T") is None:
            R = spec.side
            L = float(m.get("L", 2.0 * R / 3.0))
            if not 0 < L < R:
                raise ConfigError(f"method.L must satisfy 0 < L < R (got L={L}, R={R})")
            method = Regularized(choose_T(R, L, coeff.alpha, coeff.beta))
        else:
            method = Regularized(float(m["T"]))
    elif kind == "exact_dirichlet":
        if solution is None:
            raise ConfigError("method.type=exact_dirichlet requires a 'solution' block")
        method = ExactDirichlet(solution)
    else:
        raise ConfigError(f"method.type: unknown method {kind!r}")
    return SolveRequest(spec, coeff, source, method,
                        SolverConfig.from_dict(cfg.get("solver")), ExpmConfig.from_dict(cfg.get("expm")))


def cmd_solve(cfg: dict, out: Path, args) -> int:
    req = request_from_config(cfg)
    res = solve(req)
    method = {Naive: "naive", Regularized: "regularized", ExactDirichlet: "exact_dirichlet"}[type(req.method)]
    write_field(out / "solution", res.u, nodes_per_unit=req.grid.nodes_per_unit, T=res.T, method=method)
    with open(out / "stats.csv", "w") as f:
        f.write("R,iterations,residual,seconds\n")
        f.write(f"{req.grid.side!r},{res.stats.iterations},{float(res.stats.final_relative_residual)!r},{res.wall_time:.6f}\n")
    print(f"{method}: {res.stats.iterations} iterations, residual {res.stats.final_relative_residual:.2e}"
          + ("" if res.T is None else f", T={res.T:.6g}"))
    return EXIT_OK


def cmd_experiment(cfg: dict, out: Path, args) -> int:
    from .experiments import plan_from_dict, run_experiment

    plan = plan_from_dict(cfg.get("plan", cfg) if isinstance(cfg.get("plan"), dict) else cfg)
    report = run_experiment(plan, threads=args.threads, log=lambda s: print(s, file=sys.stderr))
    (out / "report.csv").write_text(report.to_csv())
    (out / "fits.json").write_text(report.fits_json() + "\n")
    for method, block in report.fits.items():
        parts = [f"{m}: slope={b['slope']:.4g} r2={b['r2']:.4f}" for m, b in block.items()
                 if isinstance(b, dict) and "slope" in b]
        print(f"{plan.id} {method}: " + ("; ".join(parts) or "no fit"))
    return EXIT_OK


def cmd_greens(cfg: dict, out: Path, args) -> int:
    spec = _grid_spec(cfg)
    grid = build_grid(spec)
    op = assemble(grid, fld.coefficient_from_dict(cfg.get("coefficient", {"type": "constant"})))
    y = grid.index_of(np.asarray(cfg.get("y", [0.0] * spec.dim), dtype=float))
    kind = cfg.get("kind", "elliptic")
    summary = {"kind": kind, "y_index": list(y)}
    if kind == "elliptic":
        probe = elliptic_green(op, grid, y)
        if spec.dim >= 3:
            fit = elliptic_decay_fit(probe)
            summary["decay_fit"] = fit.__dict__
    elif kind == "parabolic":
        t = float(cfg.get("t", 0.01))
        probe = heat_kernel_probe(op, grid, y, t)
        summary.update(t=t, mass=probe.mass, envelope_fit=heat_envelope_fit(probe).__dict__)
    else:
        raise ConfigError(f"kind: expected 'elliptic' or 'parabolic', got {kind!r}")
    (out / "greens.csv").write_text(probe_csv(probe))
    (out / "greens.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(json.dumps(summary))
    return EXIT_OK


def cmd_make_rhs(cfg: dict, out: Path, args) -> int:
    spec = _grid_spec(cfg)
    grid = build_grid(spec)
    coeff = fld.coefficient_from_dict(cfg.get("coefficient", {"type": "constant"}))
    solution = fld.solution_from_dict(cfg["solution"]) if cfg.get("solution") else None
    source = fld.source_from_dict(cfg.get("source", {"type": "from_solution"}), solution)
    g = fld.build_source(source, coeff, grid)
    meta = {"kind": "rhs"}
    if isinstance(source, fld.SpectrallyFiltered):
        meta.update(omega0=source.omega0, moments=source.moments)
    write_field(out / "rhs", g, nodes_per_unit=spec.nodes_per_unit, **meta)
    print(f"wrote {out / 'rhs.bin'}")
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verify import format_table, run_checks

    checks = run_checks()
    print(format_table(checks))
    return EXIT_OK if all(c.passed for c in checks) else EXIT_VERIFY


COMMANDS = {
    "solve": cmd_solve,
    "experiment": cmd_experiment,
    "greens-probe": cmd_greens,
    "make-rhs": cmd_make_rhs,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="truncreg", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, help="JSON config file")
        s.add_argument("--out", default=".", help="output directory (created if missing)")
        s.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                       help="dotted-path override, value parsed as JSON when possible")
        s.add_argument("--threads", type=int, default=1, help="parallel experiment rows")
    sub.add_parser("verify")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "verify":
            return cmd_verify(args)
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        cfg = apply_overrides(load_config(args.config), args.override)
        out = Path(args.out)
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"cannot create output directory {out}: {exc}") from None
        return COMMANDS[args.command](cfg, out, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except TruncRegError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (KeyError, TypeError, ValueError) as exc:
        # malformed config values (wrong types, missing nested keys)
        print(f"config error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
