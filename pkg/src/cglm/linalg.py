"""Iterative solvers for the assembled systems."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

AMG_THRESHOLD = 5000  # systems at least this large get a multigrid preconditioner


class SolverError(RuntimeError):
    def __init__(self, message: str, history: list[float]):
        super().__init__(f"{message} (last residuals: {history[-5:]})")
        self.history = history


@dataclass
class SolveInfo:
    method: str
    iterations: int
    residual: float  # relative, ||A x - b|| / ||b||
    history: list[float] = field(default_factory=list, repr=False)


def _preconditioner(A, kind: str):
    if kind == "jacobi":
        dinv = 1.0 / A.diagonal()
        return lambda r: dinv * r
    if kind == "amg":
        import pyamg

        ml = pyamg.smoothed_aggregation_solver(A, symmetry="symmetric", max_coarse=500)
        return lambda r: ml.solve(r, tol=1e-30, maxiter=1, cycle="V")
    raise ValueError(f"unknown preconditioner {kind!r}")


def pcg(A, b, tol: float = 1e-10, max_iter: int | None = None, x0=None, precond: str = "jacobi"):
    """Preconditioned conjugate gradients; stops on ||r|| <= tol ||b||.

    `precond` is "jacobi" or "amg" (one smoothed-aggregation V-cycle per step).
    """
    n = A.shape[0]
    max_iter = max_iter or 10 * n
    bnorm = np.linalg.norm(b)
    name = "cg" if precond == "jacobi" else f"cg-{precond}"
    if bnorm == 0:
        return np.zeros(n), SolveInfo(name, 0, 0.0, [0.0])
    M = _preconditioner(A, precond)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - A @ x
    z = M(r)
    p = z.copy()
    rz = r @ z
    history = [np.linalg.norm(r) / bnorm]
    for k in range(1, max_iter + 1):
        Ap = A @ p
        alpha = rz / (p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        res = np.linalg.norm(r) / bnorm
        history.append(res)
        if res <= tol:
            # guard against drift of the recursive residual
            true_res = np.linalg.norm(b - A @ x) / bnorm
            if true_res <= tol:
                return x, SolveInfo(name, k, true_res, history)
            r = b - A @ x
        z = M(r)
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverError(f"CG did not reach tol={tol} in {max_iter} iterations", history)


def bicgstab(A, b, tol: float = 1e-10, max_iter: int | None = None):
    n = A.shape[0]
    max_iter = max_iter or 10 * n
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return np.zeros(n), SolveInfo("bicgstab", 0, 0.0, [0.0])
    M = sp.diags(1.0 / A.diagonal())
    history: list[float] = []

    def cb(xk):
        history.append(float(np.linalg.norm(b - A @ xk) / bnorm))

    x, info = spla.bicgstab(A, b, rtol=tol, atol=0.0, maxiter=max_iter, M=M, callback=cb)
    res = float(np.linalg.norm(b - A @ x) / bnorm)
    if info != 0 or res > tol * 10:
        raise SolverError(f"BiCGSTAB did not reach tol={tol} (info={info})", history or [res])
    return x, SolveInfo("bicgstab", len(history), res, history)


def bandwidth(A) -> int:
    A = sp.coo_matrix(A)
    return int(np.abs(A.row - A.col).max()) if A.nnz else 0


def _banded_residual(ab: np.ndarray, k: int, x: np.ndarray, b: np.ndarray) -> np.ndarray:
    """b - A x accumulated in extended precision from the diagonal-ordered bands."""
    n = len(x)
    xl = x.astype(np.longdouble)
    r = b.astype(np.longdouble)
    for off in range(-k, k + 1):
        row = ab[k - off].astype(np.longdouble)
        if off >= 0:
            r[: n - off] -= row[off:] * xl[off:]
        else:
            r[-off:] -= row[: n + off] * xl[: n + off]
    return r


def banded_solve(A, b, refine: int = 2):
    """Direct solve for matrices of bandwidth <= 2 (1D P1 systems).

    A few steps of iterative refinement with extended-precision residuals bring
    the forward error down to a few ulps despite the n^2 conditioning.
    """
    A = sp.csr_matrix(A)
    k = bandwidth(A)
    n = A.shape[0]
    ab = np.zeros((2 * k + 1, n))
    for off in range(-k, k + 1):
        d = A.diagonal(off)
        if off >= 0:
            ab[k - off, off:] = d
        else:
            ab[k - off, : n + off] = d
    b = np.asarray(b, dtype=float)
    lu = lambda rhs: scipy.linalg.solve_banded((k, k), ab, rhs)
    x = lu(b)
    for _ in range(refine):
        x = (x.astype(np.longdouble) + lu(np.asarray(_banded_residual(ab, k, x, b), dtype=float))).astype(float)
    bnorm = np.linalg.norm(b) or 1.0
    res = float(np.linalg.norm(b - A @ x) / bnorm)
    return x, SolveInfo("banded", refine, res, [res])


def is_symmetric(A, tol: float = 1e-12) -> bool:
    d = A - A.T
    scale = abs(A).max() if A.nnz else 1.0
    return (abs(d).max() if d.nnz else 0.0) <= tol * scale


def solve_linear(A, b, tol: float = 1e-10, max_iter: int | None = None, method: str = "auto",
                 symmetric: bool | None = None):
    A = sp.csr_matrix(A)
    if method == "auto":
        if bandwidth(A) <= 2:
            method = "banded"
        else:
            sym = is_symmetric(A) if symmetric is None else symmetric
            method = ("cg-amg" if A.shape[0] >= AMG_THRESHOLD else "cg") if sym else "bicgstab"
    if method == "banded":
        return banded_solve(A, b)
    if method == "cg":
        return pcg(A, b, tol, max_iter)
    if method == "cg-amg":
        return pcg(A, b, tol, max_iter, precond="amg")
    if method == "bicgstab":
        return bicgstab(A, b, tol, max_iter)
    raise ValueError(f"unknown solver method {method!r}")


def lanczos_ritz(A, steps: int = 20, seed: int = 0) -> np.ndarray:
    """Ritz values of a symmetric matrix after `steps` Lanczos iterations (full reorthogonalisation)."""
    n = A.shape[0]
    steps = min(steps, n)
    rng = np.random.default_rng(seed)
    Q = np.zeros((n, steps))
    q = rng.standard_normal(n)
    q /= np.linalg.norm(q)
    alpha, beta = [], []
    b_prev, q_prev = 0.0, np.zeros(n)
    for k in range(steps):
        Q[:, k] = q
        w = A @ q - b_prev * q_prev
        a = q @ w
        w -= a * q
        w -= Q[:, : k + 1] @ (Q[:, : k + 1].T @ w)
        alpha.append(a)
        b = np.linalg.norm(w)
        if b < 1e-14 or k == steps - 1:
            break
        beta.append(b)
        q_prev, q, b_prev = q, w / b, b
    return scipy.linalg.eigvalsh_tridiagonal(np.array(alpha), np.array(beta[: len(alpha) - 1]))
