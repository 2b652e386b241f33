import json
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from truncreg.errors import ConfigError, DegenerateFit, NumericalError
from truncreg.experiments import (
    CSV_COLUMNS,
    boundary_error_isolate,
    fit_decay,
    modelling_error_isolate,
    plan_from_dict,
    run_plan,
)

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def small(name, **over):
    d = json.loads((CONFIGS / name).read_text())
    d.update(over)
    return plan_from_dict(d)


def test_fit_exact_powerlaw():
    xs = np.array([1.0, 2, 3, 5, 8])
    s, c, r2 = fit_decay(xs, 3 * xs ** -2.0, "powerlaw")
    assert s == pytest.approx(-2, abs=1e-12) and c == pytest.approx(math.log(3)) and r2 == pytest.approx(1)


def test_fit_exact_exponential():
    xs = np.array([0.5, 1, 2, 3])
    s, _, r2 = fit_decay(xs, 2 * np.exp(-3 * xs), "exponential")
    assert s == pytest.approx(-3, abs=1e-12) and r2 == pytest.approx(1)


def test_fit_noisy_powerlaw():
    rng = np.random.default_rng(11)
    xs = np.arange(2.0, 10.0)
    worst = 0.0
    for _ in range(200):
        errs = xs ** -1.0 * (1 + 0.1 * rng.uniform(-1, 1, xs.size))
        worst = max(worst, abs(fit_decay(xs, errs)[0] + 1))
    assert worst <= 0.15


@settings(max_examples=30, deadline=None)
@given(st.floats(1e-6, 1e6), st.sampled_from(["powerlaw", "exponential"]))
def test_fit_scale_invariant(scale, model):
    xs = np.array([1.0, 2, 3, 4, 6])
    errs = np.array([0.5, 0.2, 0.12, 0.05, 0.03])
    a = fit_decay(xs, errs, model)
    b = fit_decay(xs, scale * errs, model)
    assert b[0] == pytest.approx(a[0], rel=1e-9, abs=1e-12)
    assert b[1] == pytest.approx(a[1] + math.log(scale), rel=1e-9, abs=1e-9)


@pytest.mark.parametrize("xs,errs", [([1, 1, 1, 1], [1, 2, 3, 4]), ([1, 2, 3], [1, 2, 3]), ([1, 2, 3, 4], [1, 0, 1, 1])])
def test_fit_degenerate(xs, errs):
    with pytest.raises(DegenerateFit):
        fit_decay(xs, errs)


def test_plan_validation():
    base = json.loads((CONFIGS / "e-naive-rate.json").read_text())
    for bad in ({"id": "E-nope"}, {"R_values": [3, 2]}, {"R_values": []},
                {"window": {"fraction": 1.0}}, {"window": {"fixed": 2.5}}, {"methods": ["magic"]}):
        d = dict(base)
        d.update(bad)
        with pytest.raises(ConfigError):
            plan_from_dict(d)
    with pytest.raises(ConfigError):
        small("e-modelling.json", R_values=[0.5, 1.0])


def test_T_policy_precedence():
    p = small("e-total.json", T_policy={"per_R": [1, 2, 3, 4], "fixed": 9.0})
    assert p.T_for(4.0) == 3
    p = small("e-total.json", T_policy={"fixed": 9.0, "fixed_from_reference": True})
    assert p.T_for(2.0) == 9.0
    p = small("e-total.json", T_policy={"paper_rule": True})
    assert p.T_for(6.0) == pytest.approx(6.0 / (6 * math.pi * math.sqrt(math.e)))
    p = small("e-boundary.json")
    assert p.T_for(2.0) == p.T_for(8.0) == pytest.approx(12.0 / (6 * math.pi * math.sqrt(math.e)))


def test_exact_dirichlet_sanity_plan():
    p = small("e-modelling.json", R_values=[1.0], nodes_per_unit=10, methods=["exact_dirichlet"],
              solver={"rel_tol": 1e-12})
    rep = run_plan(p)
    assert len(rep.rows) == 1
    assert rep.rows[0].error <= 100 * 1e-12


def test_report_csv_columns_and_determinism():
    p = small("e-naive-rate.json", nodes_per_unit=4)
    a, b = run_plan(p), run_plan(p)
    lines = a.to_csv().splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert len(lines) == 1 + len(p.R_values)
    strip = lambda rep: [(r.R, r.method, r.error, r.iterations, r.residual) for r in rep.rows]
    assert strip(a) == strip(b)
    assert all(r.error >= 0 for r in a.rows)
    assert "powerlaw" in a.fits["naive"] and "r2" in a.fits["naive"]["powerlaw"]


def test_threads_do_not_change_rows():
    p = small("e-naive-rate.json", nodes_per_unit=4)
    a, b = run_plan(p, threads=1), run_plan(p, threads=3)
    assert [(r.R, r.error) for r in a.rows] == [(r.R, r.error) for r in b.rows]


def test_boundary_isolate_excludes_reference_row():
    p = small("e-boundary.json", R_values=[2, 3, 4, 5, 6], nodes_per_unit=6,
              reference={"type": "regularized_at_rmax", "R": 6})
    rep = boundary_error_isolate(p)
    ref_rows = [r for r in rep.rows if r.method == "regularized" and r.R == 6]
    assert ref_rows[0].excluded and ref_rows[0].error <= 1e-12
    assert rep.fits["regularized"]["n"] == 4
    naive = [r for r in rep.rows if r.method == "naive"]
    assert not any(r.excluded for r in naive)


def test_boundary_isolate_preconditions():
    with pytest.raises(ConfigError):
        boundary_error_isolate(small("e-total.json"))
    with pytest.raises(ConfigError):
        boundary_error_isolate(small("e-boundary.json", reference={"type": "closed_form"}))


def test_modelling_isolate_adds_T_sweep():
    p = small("e-modelling.json", nodes_per_unit=20)
    rep = modelling_error_isolate(p)
    sweep = [r for r in rep.rows if r.method == "regularized_vs_T"]
    assert len(sweep) == len(p.R_values)
    errs = [r.error for r in sorted(sweep, key=lambda r: r.T)]
    # monotone modelling error in T on a fixed grid
    assert all(b <= a * (1 + 1e-6) for a, b in zip(errs, errs[1:]))
    assert rep.fits["regularized_vs_T"]["exponential"]["slope"] < 0
    with pytest.raises(ConfigError):
        modelling_error_isolate(small("e-boundary.json"))


def test_solver_failure_names_R():
    p = small("e-naive-rate.json", nodes_per_unit=4, solver={"rel_tol": 1e-10, "max_iter": 2})
    with pytest.raises(NumericalError, match="R=2"):
        run_plan(p)


def test_default_configs_parse():
    for path in sorted(CONFIGS.glob("*.json")):
        plan_from_dict(json.loads(path.read_text()))
