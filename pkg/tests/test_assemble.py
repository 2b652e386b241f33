import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from truncreg import field as fld
from truncreg.assemble import DirichletData, HomogeneousDirichlet, apply, apply_bc, assemble
from truncreg.errors import DimMismatch
from truncreg.grid import GridFunction, GridSpec, build_grid
from truncreg.linsolve import SolverConfig, cg_solve


def shifted(xs):
    return xs[0] + 2.0


def test_1d_laplacian_stencil():
    g = build_grid(GridSpec(1, 1.0, 8))
    M = assemble(g, fld.Constant(1.0)).to_dense()
    row = M[3]
    np.testing.assert_allclose(row[2:5] * g.h ** 2, [-1, 2, -1])
    assert np.count_nonzero(row) == 3


def test_2d_five_point_stencil():
    g = build_grid(GridSpec(2, 1.0, 6))
    M = assemble(g, fld.Constant(1.0)).to_dense()
    m = g.n - 2
    j = 2 * m + 2
    row = M[j] * g.h ** 2
    assert row[j] == pytest.approx(4)
    for k in (j - 1, j + 1, j - m, j + m):
        assert row[k] == pytest.approx(-1)
    assert np.count_nonzero(row) == 5


def test_variable_coefficient_diagonal():
    g = build_grid(GridSpec(1, 1.0, 2))
    op = assemble(g, shifted)
    assert op.n_int == 1
    assert op.diagonal()[0] == pytest.approx(16.0, rel=1e-14)
    assert op.to_dense()[0, 0] == pytest.approx(16.0, rel=1e-14)


def test_apply_zero_and_dim_mismatch():
    g = build_grid(GridSpec(2, 1.0, 5))
    op = assemble(g, fld.RadialBump())
    assert np.all(apply(op, np.zeros(op.n_int)) == 0)
    with pytest.raises(DimMismatch):
        op.apply(np.zeros(op.n_int + 1))


@pytest.mark.parametrize("k", [1, 2, 5])
def test_sine_eigenvectors(k):
    R, rho = 2.0, 10
    g = build_grid(GridSpec(1, R, rho))
    op = assemble(g, fld.Constant(1.0))
    u = g.interior(np.sin(k * math.pi * (g.coords + R / 2) / R))
    lam = 4 / g.h ** 2 * math.sin(k * math.pi * g.h / (2 * R)) ** 2
    np.testing.assert_allclose(op.apply(u), lam * u, atol=1e-10 * lam)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31), st.sampled_from([1, 2, 3]))
def test_symmetry_random(seed, dim):
    g = build_grid(GridSpec(dim, 1.0, 6))
    op = assemble(g, fld.RadialBump())
    rng = np.random.default_rng(seed)
    u, v = rng.standard_normal((2, op.n_int))
    lhs, rhs = op.apply(u) @ v, u @ op.apply(v)
    assert abs(lhs - rhs) <= 1e-12 * max(abs(lhs), np.linalg.norm(u) * np.linalg.norm(op.apply(v)))


def test_matrix_free_matches_sparse():
    g = build_grid(GridSpec(3, 1.0, 6))
    op = assemble(g, fld.QuasiPeriodic())
    u = np.random.default_rng(1).standard_normal(op.n_int)
    np.testing.assert_allclose(op.apply(u), op.to_sparse() @ u, rtol=1e-13, atol=1e-10)
    np.testing.assert_allclose(op.diagonal(), op.to_sparse().diagonal(), rtol=1e-14)


def test_m_matrix_pattern():
    g = build_grid(GridSpec(2, 1.0, 6))
    M = assemble(g, fld.RadialBump()).to_dense()
    assert np.all(np.diag(M) > 0)
    off = M - np.diag(np.diag(M))
    assert np.all(off <= 0)
    rows = M.sum(axis=1) * g.h ** 2
    assert np.all(rows >= -1e-12)
    inner = np.zeros(g.interior_shape, dtype=bool)
    inner[1:-1, 1:-1] = True
    np.testing.assert_allclose(rows[inner.ravel()], 0.0, atol=1e-12)


def test_positive_definite_and_gershgorin():
    g = build_grid(GridSpec(2, 1.0, 8))
    c = fld.RadialBump()
    M = assemble(g, c).to_dense()
    lam = np.linalg.eigvalsh(M)
    assert lam.min() > 0
    assert lam.max() <= 4 * 2 * c.beta / g.h ** 2


def test_constant_scaling_exact():
    g = build_grid(GridSpec(2, 1.0, 5))
    a1 = assemble(g, fld.Constant(1.0))
    a3 = assemble(g, fld.Constant(3.0))
    u = np.random.default_rng(2).standard_normal(a1.n_int)
    np.testing.assert_allclose(a3.apply(u), 3.0 * a1.apply(u), rtol=1e-14, atol=1e-12)
    np.testing.assert_allclose(a1.scaled(3.0).apply(u), a3.apply(u), rtol=1e-14, atol=1e-12)


def test_maximum_principle():
    g = build_grid(GridSpec(2, 1.0, 8))
    op = assemble(g, fld.RadialBump())
    rhs = np.random.default_rng(4).random(op.n_int)
    u, _ = cg_solve(op, rhs, SolverConfig(rel_tol=1e-12))
    assert u.min() >= -1e-12 * u.max()


def test_apply_bc_examples():
    g = build_grid(GridSpec(1, 1.0, 2))
    op = assemble(g, fld.Constant(1.0))
    zero = GridFunction(g, np.zeros(3))
    np.testing.assert_array_equal(apply_bc(op, HomogeneousDirichlet(), zero), [0.0])
    data = DirichletData(GridFunction(g, np.array([1.0, 0.0, 1.0])))
    np.testing.assert_allclose(apply_bc(op, data, zero), [8.0])


def test_apply_bc_dim_mismatch():
    g = build_grid(GridSpec(1, 1.0, 4))
    op = assemble(g, fld.Constant(1.0))
    other = build_grid(GridSpec(1, 2.0, 4))
    with pytest.raises(DimMismatch):
        apply_bc(op, HomogeneousDirichlet(), GridFunction(other, np.zeros(other.shape)))


def test_second_order_consistency():
    errs = []
    for rho in (20, 40, 80):
        g = build_grid(GridSpec(1, 1.0, rho))
        op = assemble(g, shifted)
        x = g.coords
        u = np.cos(math.pi * x)
        # -(a u')' with a = x + 2
        g_exact = math.pi * np.sin(math.pi * x) + (x + 2) * math.pi ** 2 * np.cos(math.pi * x)
        Au = op.apply_full(u).ravel()
        errs.append(np.abs(Au - g.interior(g_exact)).max())
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 1.9)
