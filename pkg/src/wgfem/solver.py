"""Jacobi-preconditioned Krylov solvers for the assembled system.

CG is used when the matrix is symmetric, BiCGStab otherwise. Matrices are
held in ``scipy.sparse.csr_matrix`` (row offsets, sorted column indices,
values); only its mat-vec is used. ``dense_solve`` is the direct oracle.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
DENSE_LIMIT = 2000


class SolverError(RuntimeError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


@dataclass
class SolveReport:
    method: str
    iterations: int
    residual: float  # true ||Ax - b|| / ||b||, recomputed after the solve
    estimate: float  # solver-internal estimate at exit
    wall_time: float
    converged: bool


def as_csr(matrix) -> sp.csr_matrix:
    A = sp.csr_matrix(matrix)
    A.sum_duplicates()
    A.eliminate_zeros()
    A.sort_indices()
    return A


def is_symmetric(A: sp.csr_matrix, rtol: float = 1e-12) -> bool:
    diff = abs(A - A.T)
    scale = abs(A).max()
    return diff.nnz == 0 or diff.max() <= rtol * scale


def true_residual(A, x, b) -> float:
    nb = np.linalg.norm(b)
    r = np.linalg.norm(b - A @ x)
    return float(r / nb) if nb > 0 else float(r)


def _jacobi(A):
    d = A.diagonal().copy()
    d[d == 0] = 1.0
    return 1.0 / d


def cg(A, b, tol=DEFAULT_TOL, max_iter=10000, x0=None):
    """Preconditioned conjugate gradients. Returns (x, iterations, estimate)."""
    inv_d = _jacobi(A)
    x = np.zeros_like(b) if x0 is None else x0.copy()
    r = b - A @ x
    nb = np.linalg.norm(b) or 1.0
    z = inv_d * r
    p = z.copy()
    rz = r @ z
    res = np.linalg.norm(r) / nb
    it = 0
    while res > tol and it < max_iter:
        Ap = A @ p
        pAp = p @ Ap
        if pAp <= 0:
            raise SolverError(f"CG breakdown: p'Ap = {pAp:.3e} at iteration {it}")
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        z = inv_d * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
        res = np.linalg.norm(r) / nb
        it += 1
    return x, it, res


def bicgstab(A, b, tol=DEFAULT_TOL, max_iter=10000, x0=None):
    """Right-preconditioned BiCGStab. Returns (x, iterations, estimate)."""
    inv_d = _jacobi(A)
    x = np.zeros_like(b) if x0 is None else x0.copy()
    r = b - A @ x
    nb = np.linalg.norm(b) or 1.0
    r_hat = r.copy()
    rho = alpha = omega = 1.0
    v = np.zeros_like(b)
    p = np.zeros_like(b)
    res = np.linalg.norm(r) / nb
    it = 0
    while res > tol and it < max_iter:
        rho_new = r_hat @ r
        if rho_new == 0.0:
            raise SolverError(f"BiCGStab breakdown: rho = 0 at iteration {it}")
        beta = (rho_new / rho) * (alpha / omega)
        rho = rho_new
        p = r + beta * (p - omega * v)
        ph = inv_d * p
        v = A @ ph
        alpha = rho / (r_hat @ v)
        s = r - alpha * v
        it += 1
        if np.linalg.norm(s) / nb <= tol:
            x += alpha * ph
            r = s
            res = np.linalg.norm(r) / nb
            break
        sh = inv_d * s
        t = A @ sh
        tt = t @ t
        if tt == 0.0:
            raise SolverError(f"BiCGStab breakdown: t = 0 at iteration {it}")
        omega = (t @ s) / tt
        x += alpha * ph + omega * sh
        r = s - omega * t
        res = np.linalg.norm(r) / nb
        if omega == 0.0:
            raise SolverError(f"BiCGStab breakdown: omega = 0 at iteration {it}")
    return x, it, res


def dense_solve(A, b) -> np.ndarray:
    """Direct LU solve on the densified matrix; the reference answer for small systems."""
    return np.linalg.solve(A.toarray() if sp.issparse(A) else np.asarray(A), b)


def solve(system, tol: float = DEFAULT_TOL, max_iter: int = 20000, method: str = "auto"):
    """Solve ``system.matrix x = system.rhs``; ``system`` may also be a (matrix, rhs) pair.

    Returns ``(x, SolveReport)``. Raises SolverError if the true relative
    residual misses ``tol`` and no dense fallback applies.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    A, b = (system.matrix, system.rhs) if hasattr(system, "matrix") else system
    A = as_csr(A)
    b = np.asarray(b, dtype=float)
    if A.shape[0] != A.shape[1] or A.shape[0] != b.shape[0]:
        raise ValueError(f"incompatible system: matrix {A.shape}, rhs {b.shape}")
    if method == "auto":
        method = "cg" if is_symmetric(A) else "bicgstab"
    t0 = time.perf_counter()
    if method == "dense":
        x, it, est = dense_solve(A, b), 0, 0.0
    else:
        krylov = {"cg": cg, "bicgstab": bicgstab}[method]
        x, it, est = None, 0, np.inf
        x0 = None
        # recursive residuals drift; restart from the iterate until the true residual agrees
        for _ in range(5):
            try:
                x, n_it, est = krylov(A, b, tol=tol, max_iter=max_iter - it, x0=x0)
            except SolverError as exc:
                log.warning("%s", exc)
                break
            it += n_it
            if true_residual(A, x, b) <= tol or it >= max_iter:
                break
            x0 = x
    res = true_residual(A, x, b) if x is not None else np.inf
    if not res <= tol and A.shape[0] <= DENSE_LIMIT:
        log.info("%s missed tol (%.2e); dense fallback", method, res)
        method, x = method + "+dense", dense_solve(A, b)
        res = true_residual(A, x, b)
        est = res
    report = SolveReport(method, it, res, float(est), time.perf_counter() - t0, bool(res <= tol))
    if not report.converged:
        raise SolverError(f"{method} did not reach tol {tol:.1e} (residual {res:.3e}, "
                          f"{it} iterations)", report)
    return x, report
