"""Conjugate-gradient solver and preconditioners."""

import numpy as np
import pytest
import scipy.sparse as sp

from porestream.krylov import (
    BreakdownError,
    ConvergenceError,
    SolverConfig,
    apply_preconditioner,
    cg_solve,
)


def random_spd(n, rng, density=0.3):
    B = sp.random(n, n, density=density, random_state=rng, format="csr")
    A = B @ B.T + sp.identity(n) * n
    return sp.csr_matrix(A)


def test_identity_one_iteration():
    A = sp.identity(5, format="csr")
    b = np.array([1.0, -2.0, 3.0, 0.5, 0.0])
    x, iters, resid = cg_solve(A, b, cfg=SolverConfig(preconditioner="none"))
    assert iters <= 1
    assert np.allclose(x, b, atol=1e-12)
    assert resid <= 1e-10


def test_two_by_two_exact_termination():
    A = sp.csr_matrix(np.array([[4.0, 1.0], [1.0, 3.0]]))
    b = np.array([1.0, 2.0])
    x, iters, _ = cg_solve(A, b, cfg=SolverConfig(preconditioner="none"))
    assert iters <= 2
    assert np.allclose(x, [1.0 / 11.0, 7.0 / 11.0], atol=1e-10)


def test_singular_path_laplacian_zero_mean_solution():
    A = sp.csr_matrix(
        np.array([[1.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 1.0]])
    )
    b = np.array([1.0, 0.0, -1.0])
    cfg = SolverConfig(preconditioner="none", nullspace_projection=True)
    x, _, resid = cg_solve(A, b, cfg=cfg)
    assert resid <= 1e-10
    assert np.allclose(x, [1.0, 0.0, -1.0], atol=1e-9)
    assert abs(np.sum(x)) <= 1e-10


def test_pure_neumann_2d_laplacian():
    nx = 12
    lap1 = sp.diags([-1.0, 2.0, -1.0], [-1, 0, 1], shape=(nx, nx)).tolil()
    lap1[0, 0] = 1.0
    lap1[-1, -1] = 1.0
    lap1 = sp.csr_matrix(lap1)
    eye = sp.identity(nx)
    A = sp.csr_matrix(sp.kron(lap1, eye) + sp.kron(eye, lap1))
    rng = np.random.default_rng(0)
    b = rng.normal(size=nx * nx)
    b -= b.mean()
    cfg = SolverConfig(preconditioner="sgs", nullspace_projection=True)
    x, _, resid = cg_solve(A, b, cfg=cfg)
    assert resid <= 1e-10
    assert abs(np.sum(x)) <= 1e-10
    assert np.linalg.norm(A @ x - b) / np.linalg.norm(b) <= 1e-9


def test_jacobi_on_diagonal_matrix_is_exact():
    A = sp.diags([2.0, 4.0, 8.0]).tocsr()
    z = apply_preconditioner(A, np.array([2.0, 4.0, 8.0]), "jacobi")
    assert np.array_equal(z, [1.0, 1.0, 1.0])


def test_sgs_on_identity_is_identity():
    A = sp.identity(4, format="csr")
    r = np.array([1.0, 2.0, 3.0, 4.0])
    assert np.array_equal(apply_preconditioner(A, r, "sgs"), r)


def test_jacobi_two_by_two_example():
    A = sp.csr_matrix(np.array([[4.0, 1.0], [1.0, 3.0]]))
    z = apply_preconditioner(A, np.array([4.0, 3.0]), "jacobi")
    assert np.array_equal(z, [1.0, 1.0])


def test_sgs_matches_dense_formula():
    rng = np.random.default_rng(1)
    A = random_spd(8, rng).toarray()
    D = np.diag(np.diag(A))
    L = np.tril(A, -1)
    U = np.triu(A, 1)
    r = rng.normal(size=8)
    expected = np.linalg.solve(D + U, D @ np.linalg.solve(D + L, r))
    z = apply_preconditioner(sp.csr_matrix(A), r, "sgs")
    assert np.allclose(z, expected, atol=1e-12)


@pytest.mark.parametrize("kind", ["jacobi", "sgs"])
def test_preconditioner_symmetry(kind):
    rng = np.random.default_rng(2)
    A = random_spd(20, rng)
    for _ in range(5):
        r1 = rng.normal(size=20)
        r2 = rng.normal(size=20)
        z1 = apply_preconditioner(A, r1, kind)
        z2 = apply_preconditioner(A, r2, kind)
        assert abs(z1 @ r2 - r1 @ z2) <= 1e-12 * (
            np.linalg.norm(r1) * np.linalg.norm(r2)
        )


@pytest.mark.parametrize("kind", ["none", "jacobi", "sgs"])
def test_a_norm_error_monotonicity(kind):
    rng = np.random.default_rng(3)
    A = random_spd(15, rng)
    b = rng.normal(size=15)
    x_exact = np.linalg.solve(A.toarray(), b)
    iterates = []
    cg_solve(A, b, cfg=SolverConfig(preconditioner=kind), callback=iterates.append)
    Ad = A.toarray()
    errs = [np.sqrt((x - x_exact) @ Ad @ (x - x_exact)) for x in iterates]
    assert all(e2 <= e1 * (1.0 + 1e-10) + 1e-14 for e1, e2 in zip(errs, errs[1:]))


def test_breakdown_on_negative_definite():
    A = sp.csr_matrix(-np.eye(3))
    with pytest.raises(BreakdownError):
        cg_solve(A, np.ones(3), cfg=SolverConfig(preconditioner="none"))


def test_iteration_cap_raises():
    rng = np.random.default_rng(4)
    A = random_spd(30, rng)
    b = rng.normal(size=30)
    with pytest.raises(ConvergenceError):
        cg_solve(
            A, b, cfg=SolverConfig(preconditioner="none", tol=1e-14, max_iter=2)
        )


def test_warm_start_converges_immediately():
    rng = np.random.default_rng(5)
    A = random_spd(25, rng)
    b = rng.normal(size=25)
    x, _, _ = cg_solve(A, b, cfg=SolverConfig(preconditioner="sgs"))
    x2, iters, _ = cg_solve(A, b, x0=x, cfg=SolverConfig(preconditioner="sgs"))
    assert iters == 0
    assert np.array_equal(x, x2)


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(tol=0.0)
    with pytest.raises(ValueError):
        SolverConfig(max_iter=0)
    with pytest.raises(ValueError):
        SolverConfig(preconditioner="amg")
    with pytest.raises(ValueError):
        apply_preconditioner(
            sp.csr_matrix(np.array([[0.0, 1.0], [1.0, 0.0]])),
            np.ones(2),
            "jacobi",
        )
