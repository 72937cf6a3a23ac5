"""Sparse storage and solvers with a post-hoc residual contract.

Factorizations are delegated to SuperLU (``scipy.sparse.linalg.splu``) with a
minimum-degree ordering on ``A + A^T`` for symmetric systems and COLAMD with
partial pivoting otherwise. Every accepted direct solve satisfies
``||A x - b|| / ||b|| <= tol``, measured with compensated arithmetic. When
a float64 solve misses the contract (large Lame parameters make ``A`` very
ill conditioned) the solution is refined in double-double arithmetic.
"""
from __future__ import annotations

import logging

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

log = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-10


class SolverError(RuntimeError):
    pass


class FactorizationError(SolverError):
    def __init__(self, message, pivot_row=None):
        super().__init__(message)
        self.pivot_row = pivot_row


class ConvergenceError(SolverError):
    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


def finalize_csr(A):
    """CSR with summed duplicates, sorted column indices and no stored zeros."""
    A = sp.csr_matrix(A)
    A.sum_duplicates()
    A.eliminate_zeros()
    A.sort_indices()
    return A


def is_symmetric(A, rtol=1e-12):
    A = sp.csr_matrix(A)
    scale = abs(A).max() if A.nnz else 0.0
    if scale == 0.0:
        return True
    D = A - A.T
    return (abs(D).max() if D.nnz else 0.0) <= rtol * scale


class ExtendedVector(np.ndarray):
    """Float64 head of a double-double vector; ``tail`` holds the remainder.

    Behaves as the float64 head everywhere; arithmetic on it yields plain
    arrays, so a stale tail never leaks into derived values.
    """

    def __new__(cls, head, tail):
        obj = np.asarray(head, dtype=float).view(cls)
        obj.tail = np.asarray(tail, dtype=float)
        return obj

    def __array_finalize__(self, obj):
        self.tail = None

    def __array_wrap__(self, arr, context=None, return_scalar=False):
        arr = np.asarray(arr).view(np.ndarray)
        return arr[()] if return_scalar else arr

    def head(self):
        return self.view(np.ndarray)


_SPLIT = 134217729.0  # 2**27 + 1


def _two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _two_prod(a, b):
    p = a * b
    ah = a * _SPLIT
    ah = ah - (ah - a)
    al = a - ah
    bh = b * _SPLIT
    bh = bh - (bh - b)
    bl = b - bh
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


def accurate_residual(A, x, b, tail=None):
    """``b - A (x + tail)`` as accurate as twice-working-precision arithmetic.

    Products are split exactly (Dekker) and each row is summed with
    error-free transformations, so cancellation among large entries of
    ``A`` does not pollute the result.
    """
    A = sp.csr_matrix(A)
    x = np.asarray(x, dtype=float)
    s = np.array(b, dtype=float)
    c = np.zeros_like(s)
    counts = np.diff(A.indptr)
    start = A.indptr[:-1]
    for k in range(int(counts.max()) if len(counts) else 0):
        rows = np.flatnonzero(counts > k)
        pos = start[rows] + k
        a = A.data[pos]
        j = A.indices[pos]
        p, e = _two_prod(a, x[j])
        s_new, q = _two_sum(s[rows], -p)
        s[rows] = s_new
        c[rows] += q - e
        if tail is not None:
            c[rows] -= a * tail[j]
    return s + c


def relative_residual(A, x, b):
    """``||A x - b|| / ||b||``, accounting for an :class:`ExtendedVector` tail."""
    tail = getattr(x, "tail", None)
    r = accurate_residual(A, np.asarray(x, dtype=float), b, tail)
    return float(np.linalg.norm(r) / np.linalg.norm(b))


def _pivot_failure(A, message):
    """Locate a vanishing pivot with a partial-pivoting LU, if one exists."""
    try:
        lu = spla.splu(sp.csc_matrix(A), permc_spec="COLAMD")
    except RuntimeError:
        return FactorizationError(f"{message}; matrix is singular", None)
    d = np.abs(lu.U.diagonal())
    k = int(np.argmin(d))
    row = int(np.flatnonzero(lu.perm_r == k)[0])
    return FactorizationError(f"{message}; smallest pivot {d[k]:.3e} "
                              f"at row {row}", row)


def factorize(A, symmetric=None):
    """SuperLU factorization; symmetric systems keep diagonal pivots."""
    A = sp.csc_matrix(A)
    if A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    if symmetric is None:
        symmetric = is_symmetric(A)
    try:
        if symmetric:
            lu = spla.splu(A, permc_spec="MMD_AT_PLUS_A",
                           diag_pivot_thresh=0.0,
                           options={"SymmetricMode": True})
        else:
            lu = spla.splu(A, permc_spec="COLAMD")
    except RuntimeError as exc:
        raise _pivot_failure(A, f"factorization failed ({exc})") from None
    d = np.abs(lu.U.diagonal())
    if d.size and (not np.all(np.isfinite(d)) or d.min() == 0.0):
        k = int(np.argmin(d))
        row = int(np.flatnonzero(lu.perm_r == k)[0])
        raise FactorizationError(f"zero pivot at row {row}", row)
    return lu


def solve_direct(A, b, symmetric=None, tol=RESIDUAL_TOL, max_refine=10):
    """Direct sparse solve honouring ``||A x - b|| <= tol ||b||``.

    Returns a float64 array when that meets the contract; otherwise the
    solution is refined in double-double arithmetic and returned as an
    :class:`ExtendedVector`.
    """
    A = finalize_csr(A)
    b = np.asarray(b, dtype=float)
    if A.shape[0] != len(b):
        raise ValueError("dimension mismatch")
    if not np.any(b):
        return np.zeros_like(b)
    lu = factorize(A, symmetric)
    nb = np.linalg.norm(b)
    x = lu.solve(b)
    tail = np.zeros_like(x)
    for step in range(max_refine + 1):
        r = accurate_residual(A, x, b, tail)
        res = np.linalg.norm(r) / nb
        log.debug("refinement step %d: residual %.3e", step, res)
        if res <= tol:
            return x if step == 0 else ExtendedVector(x, tail)
        if step == max_refine or not np.all(np.isfinite(r)):
            break
        # double-double update (x, tail) += d
        s, e = _two_sum(x, lu.solve(r))
        x, tail = _two_sum(s, e + tail)
    raise SolverError(f"residual contract violated: {res:.3e} > {tol:.1e}")


def solve_cg(A, b, tol=1e-10, maxit=None, precondition=True, callback=None):
    """Conjugate gradients (Jacobi preconditioned by default) for SPD ``A``."""
    A = finalize_csr(A)
    b = np.asarray(b, dtype=float)
    if not np.any(b):
        return np.zeros_like(b)
    n = A.shape[0]
    maxit = 10 * n if maxit is None else int(maxit)
    M = None
    if precondition:
        d = A.diagonal()
        if np.any(d <= 0):
            raise SolverError("Jacobi preconditioner needs a positive diagonal")
        inv = 1.0 / d
        M = spla.LinearOperator((n, n), matvec=lambda r: inv * r, dtype=float)
    x, info = spla.cg(A, b, rtol=tol, atol=0.0, maxiter=maxit, M=M,
                      callback=callback)
    res = relative_residual(A, x, b)
    if info != 0 or res > tol * (1 + 1e-6):
        raise ConvergenceError(f"CG did not converge in {maxit} iterations "
                               f"(relative residual {res:.3e})", res)
    return x
