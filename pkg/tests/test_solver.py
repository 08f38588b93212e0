"""
Tests for sparse solves, diagonal dominance certificates and norm estimates
"""

import numpy as np
import pytest
import scipy.sparse as sp

from umblt.models.coefficients import ConstantField, OpticalCoefficients, SourceField
from umblt.models.mesh import build_grid
from umblt.services.assembly_service import assemble_forward_matrix, assemble_forward_system
from umblt.services.solver_service import NormMode, SolveMethod, get_solver_service
from umblt.utils.errors import SolverError


@pytest.fixture
def solver():
    return get_solver_service()


def test_identity_solve(solver):
    b = np.arange(1.0, 6.0)
    report = solver.solve_sparse(sp.identity(5, format="csr"), b)
    np.testing.assert_array_equal(report.solution, b)
    assert report.residual_norm == 0.0
    assert report.method == SolveMethod.DIRECT


def test_scalar_solve(solver):
    report = solver.solve_sparse(np.array([[4.0]]), np.array([8.0]))
    assert report.solution[0] == pytest.approx(2.0)


def test_forward_solve_matches_dense(solver):
    g = build_grid((0, 1, 0, 1), 5, 5)
    c = OpticalCoefficients(ConstantField(1.0), ConstantField(1.0))
    system = assemble_forward_system(g, c, SourceField(ConstantField(1.0)))
    report = solver.solve_sparse(system)
    dense = np.linalg.solve(system.matrix.toarray(), system.rhs)
    np.testing.assert_allclose(report.solution, dense, rtol=1e-12, atol=1e-14)
    assert report.residual_norm < 1e-12


def test_bicgstab_agrees_with_direct(solver, exp1):
    c, s = exp1
    system = assemble_forward_system(build_grid((-1, 1, -1, 1), 21, 21), c, s)
    direct = solver.solve_sparse(system)
    iterative = solver.solve_sparse(system, method="bicgstab")
    assert iterative.method == SolveMethod.BICGSTAB
    assert iterative.iterations > 0
    np.testing.assert_allclose(iterative.solution, direct.solution, rtol=1e-7, atol=1e-9)


def test_singular_matrix_raises(solver):
    A = sp.csr_matrix(np.array([[1.0, 0.0], [0.0, 0.0]]))
    with pytest.raises(SolverError):
        solver.solve_sparse(A, np.ones(2))


def test_bare_matrix_needs_rhs(solver):
    with pytest.raises(SolverError):
        solver.solve_sparse(sp.identity(3, format="csr"))


def test_rhs_length_checked(solver):
    with pytest.raises(SolverError):
        solver.solve_sparse(sp.identity(3, format="csr"), np.ones(4))


def test_identity_is_wcdd(solver):
    cert = solver.is_wcdd(sp.identity(4, format="csr"))
    assert cert.is_wcdd
    assert cert.sdd_rows.size == 4


def test_weakly_dominant_without_chain(solver):
    cert = solver.is_wcdd(np.array([[1.0, -1.0], [-1.0, 1.0]]))
    assert cert.is_wdd
    assert cert.sdd_rows.size == 0
    assert not cert.is_wcdd


def test_chain_reaches_strict_row(solver):
    # row 0 weakly dominant, row 1 weakly dominant, row 2 strict
    A = np.array([[1.0, -1.0, 0.0], [0.0, 1.0, -1.0], [0.0, 0.0, 1.0]])
    cert = solver.is_wcdd(A)
    assert cert.is_wcdd
    assert cert.chain(0) == [0, 1, 2]
    assert cert.chains == {0: [0, 1, 2], 1: [1, 2]}


def test_unreachable_row_reported(solver):
    A = np.array([[2.0, 0.0, 0.0], [0.0, 1.0, -1.0], [0.0, -1.0, 1.0]])
    cert = solver.is_wcdd(A)
    assert cert.is_wdd
    assert not cert.is_wcdd
    assert cert.chain(1) is None


@pytest.mark.parametrize("n", [9, 21, 51])
@pytest.mark.parametrize("experiment", ["exp1", "exp2"])
def test_forward_matrix_is_wcdd(solver, request, experiment, n):
    c, s = request.getfixturevalue(experiment)
    g = build_grid((-1, 1, -1, 1), n, n)
    assert solver.is_wcdd(assemble_forward_matrix(g, c).matrix).is_wcdd
    report = solver.solve_sparse(assemble_forward_system(g, c, s))
    assert report.residual_norm < 1e-10


def test_norm_of_diagonal(solver):
    A = sp.diags([1.0, 2.0, 3.0]).tocsr()
    assert solver.norm2_estimate(A) == pytest.approx(3.0, rel=1e-2)
    assert solver.norm2_estimate(A, NormMode.INVERSE) == pytest.approx(1.0, rel=1e-2)
    assert solver.norm2_estimate(A, "direct") <= 3.0 + 1e-12


def test_norm_matches_svd_for_spd(solver, rng):
    Q, _ = np.linalg.qr(rng.normal(size=(10, 10)))
    spectrum = np.concatenate([[10.0], np.linspace(0.5, 2.0, 9)])
    A = Q @ np.diag(spectrum) @ Q.T
    assert solver.norm2_estimate(A) == pytest.approx(10.0, rel=1e-2)
    assert solver.norm2_estimate(A, NormMode.INVERSE) == pytest.approx(2.0, rel=1e-2)


def test_norm_product_bounds_condition(solver, rng):
    for _ in range(20):
        A = rng.normal(size=(6, 6)) + 6.0 * np.eye(6)
        direct = solver.norm2_estimate(A, tol=1e-8)
        inverse = solver.norm2_estimate(A, NormMode.INVERSE, tol=1e-8)
        assert direct * inverse >= 1.0 - 1e-6


def test_norm_of_zero_matrix(solver):
    assert solver.norm2_estimate(sp.csr_matrix((4, 4))) == 0.0


@pytest.mark.parametrize("experiment", ["exp1", "exp2"])
def test_norm_estimates_bound_random_vectors(solver, request, rng, experiment):
    c, _ = request.getfixturevalue(experiment)
    A = assemble_forward_matrix(build_grid((-1, 1, -1, 1), 21, 21), c).matrix
    direct = solver.norm2_estimate(A, tol=1e-8)
    inverse = solver.norm2_estimate(A, NormMode.INVERSE, tol=1e-8)
    lu = solver.factorize(A)
    for _ in range(20):
        x = rng.normal(size=A.shape[0])
        assert np.linalg.norm(A @ x) <= direct * np.linalg.norm(x) * (1 + 1e-6)
        assert np.linalg.norm(lu.solve(x)) <= inverse * np.linalg.norm(x) * (1 + 1e-6)
