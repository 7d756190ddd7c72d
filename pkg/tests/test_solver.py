import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, strategies as st

from wgfem.solver import (DENSE_LIMIT, SolverError, bicgstab, cg, dense_solve, is_symmetric, solve,
                          true_residual)
from wgfem.study import solve_level
from wgfem.mesh import build_structured
from wgfem.problems import TABLE1, TABLE2
from wgfem.assembly import assemble
from wgfem.space import WeakSpace, project_boundary
from wgfem.weak_gradient import build_operators


def wg_system(problem, n, k=0):
    space = WeakSpace(build_structured(n), k)
    ops = build_operators(space)
    return assemble(space, ops, problem.coeffs, project_boundary(space, problem.coeffs.g))


def test_identity():
    b = np.arange(1.0, 6.0)
    x, rep = solve((sp.identity(5, format="csr"), b))
    assert np.array_equal(x, b) or np.abs(x - b).max() <= 1e-15
    assert rep.converged and rep.method == "cg"


@pytest.mark.parametrize("problem, method", [(TABLE2, "cg"), (TABLE1, "bicgstab")])
def test_matches_dense(problem, method):
    s = wg_system(problem, 8)
    x, rep = solve(s)
    assert rep.method == method and rep.converged
    ref = dense_solve(s.matrix, s.rhs)
    assert np.abs(x - ref).max() <= 1e-8 * np.abs(ref).max()
    assert rep.residual <= 1e-10


def test_symmetry_detection():
    assert is_symmetric(wg_system(TABLE2, 4).matrix)
    assert not is_symmetric(wg_system(TABLE1, 4).matrix)


@pytest.mark.parametrize("krylov, problem", [(cg, TABLE2), (bicgstab, TABLE1)])
def test_estimate_is_honest(krylov, problem):
    s = wg_system(problem, 16)
    x, it, est = krylov(s.matrix, s.rhs, tol=1e-10)
    true = true_residual(s.matrix, x, s.rhs)
    assert est <= 1e-10
    assert true <= 10 * max(est, 1e-16) or true <= 1e-10


def test_deterministic():
    s = wg_system(TABLE1, 8)
    x1, _ = solve(s)
    x2, _ = solve(s)
    assert np.array_equal(x1, x2)


def test_failure_raises_with_report():
    s = wg_system(TABLE2, 32)
    assert s.dim > DENSE_LIMIT
    with pytest.raises(SolverError) as info:
        solve(s, max_iter=3)
    assert info.value.report is not None and not info.value.report.converged
    assert info.value.report.residual > 1e-10


def test_dense_fallback_small_system():
    s = wg_system(TABLE2, 4)
    x, rep = solve(s, max_iter=2)
    assert rep.method.endswith("+dense") and rep.converged


def test_bad_inputs():
    with pytest.raises(ValueError):
        solve((sp.identity(3, format="csr"), np.ones(4)))
    with pytest.raises(ValueError):
        solve((sp.identity(3, format="csr"), np.ones(3)), tol=0)


def test_zero_rhs():
    s = wg_system(TABLE2, 4)
    x, rep = solve((s.matrix, np.zeros(s.dim)))
    assert np.all(x == 0)


@given(st.integers(2, 40), st.integers(0, 2**31 - 1))
def test_random_spd_and_nonsymmetric(n, seed):
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((n, n))
    b = rng.standard_normal(n)
    spd = sp.csr_matrix(B @ B.T + n * np.eye(n))
    x, rep = solve((spd, b))
    assert rep.residual <= 1e-10
    ns = sp.csr_matrix(B - B.T + n * np.eye(n))
    x, rep = solve((ns, b))
    assert rep.residual <= 1e-10
    assert np.allclose(x, np.linalg.solve(ns.toarray(), b), atol=1e-8)


def test_solve_level_report():
    sol = solve_level(TABLE1, build_structured(4), 0)
    assert sol.report.converged and sol.report.iterations > 0 and sol.report.wall_time >= 0
