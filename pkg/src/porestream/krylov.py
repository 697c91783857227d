"""Preconditioned conjugate gradients for symmetric positive (semi)definite systems.

Solves the DG pressure system. Preconditioners: none, Jacobi, or symmetric
Gauss-Seidel (one forward plus one backward sweep, a symmetric operator).
Singular pure-Neumann systems are handled by projecting the right-hand side
and the iterates onto the complement of an explicit nullspace vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve_triangular

__all__ = [
    "SolverConfig",
    "BreakdownError",
    "ConvergenceError",
    "cg_solve",
    "apply_preconditioner",
    "make_preconditioner",
]

PRECONDITIONERS = ("none", "jacobi", "sgs")


class BreakdownError(RuntimeError):
    """p^T A p <= 0 encountered: the operator is not positive definite
    on the search space (after any nullspace projection)."""


class ConvergenceError(RuntimeError):
    """Iteration cap reached before the residual target."""


@dataclass(frozen=True)
class SolverConfig:
    """CG controls. max_iter=None means 10x the system size."""

    tol: float = 1e-10
    max_iter: int | None = None
    preconditioner: str = "sgs"
    nullspace_projection: bool = False

    def __post_init__(self):
        if self.tol <= 0.0:
            raise ValueError("tol must be positive")
        if self.max_iter is not None and self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.preconditioner not in PRECONDITIONERS:
            raise ValueError(
                f"unknown preconditioner {self.preconditioner!r}; "
                f"choose from {PRECONDITIONERS}"
            )


def make_preconditioner(A: sp.spmatrix, kind: str):
    """Return z = M^{-1} r as a callable; factors are built once.

    jacobi: z_i = r_i / A_ii.
    sgs:    z = (D+U)^{-1} D (D+L)^{-1} r, i.e. one forward and one
            backward Gauss-Seidel sweep; symmetric whenever A is.
    """
    if kind == "none":
        return lambda r: r
    diag = A.diagonal()
    if np.any(diag == 0.0):
        raise ValueError("preconditioner needs a zero-free diagonal")
    if kind == "jacobi":
        inv = 1.0 / diag
        return lambda r: r * inv
    if kind == "sgs":
        lower = sp.csr_matrix(sp.tril(A, k=0))
        upper = sp.csr_matrix(sp.triu(A, k=0))

        def apply(r):
            y = spsolve_triangular(lower, r, lower=True)
            return spsolve_triangular(upper, diag * y, lower=False)

        return apply
    raise ValueError(f"unknown preconditioner {kind!r}")


def apply_preconditioner(A: sp.spmatrix, r: np.ndarray, kind: str) -> np.ndarray:
    """One-shot preconditioner application (builds factors each call)."""
    return make_preconditioner(A, kind)(np.asarray(r, dtype=np.float64))


def cg_solve(
    A: sp.spmatrix,
    b: np.ndarray,
    x0: np.ndarray | None = None,
    cfg: SolverConfig = SolverConfig(),
    nullspace: np.ndarray | None = None,
    callback=None,
):
    """Solve A x = b by preconditioned CG.

    Returns (x, iterations, final_relative_residual). The target is
    ||b - A x|| / ||b|| <= cfg.tol. With cfg.nullspace_projection, b, x0
    and every residual are projected orthogonal to the nullspace vector
    (default: the constant vector), and the returned x satisfies
    <x, nullspace> = 0.

    Raises ConvergenceError past the iteration cap and BreakdownError when
    p^T A p <= 0 reveals an operator that is not positive definite on the
    search space.
    """
    b = np.asarray(b, dtype=np.float64)
    n = len(b)
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=np.float64).copy()

    project = None
    if cfg.nullspace_projection:
        v = np.ones(n) if nullspace is None else np.asarray(nullspace, dtype=np.float64)
        vv = float(v @ v)

        def project(w):
            return w - (v @ w) / vv * v

        b = project(b)
        x = project(x)

    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros(n), 0, 0.0

    max_iter = cfg.max_iter if cfg.max_iter is not None else 10 * n
    precond = make_preconditioner(A, cfg.preconditioner)

    r = b - A @ x
    if project is not None:
        r = project(r)
    resid = float(np.linalg.norm(r)) / bnorm
    if callback is not None:
        callback(x.copy())
    if resid <= cfg.tol:
        return x, 0, resid

    z = precond(r)
    if project is not None:
        z = project(z)
    p = z.copy()
    rz = float(r @ z)
    for k in range(1, max_iter + 1):
        Ap = A @ p
        pAp = float(p @ Ap)
        if pAp <= 0.0:
            raise BreakdownError(
                "p^T A p <= 0: matrix is not positive definite on the search space"
            )
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        if project is not None:
            x = project(x)
            r = project(r)
        if callback is not None:
            callback(x.copy())
        resid = float(np.linalg.norm(r)) / bnorm
        if resid <= cfg.tol:
            return x, k, resid
        z = precond(r)
        if project is not None:
            z = project(z)
        rz_new = float(r @ z)
        beta = rz_new / rz
        p = z + beta * p
        rz = rz_new
    raise ConvergenceError(
        f"CG did not reach tol={cfg.tol} within {max_iter} iterations "
        f"(relative residual {resid:.3e})"
    )
