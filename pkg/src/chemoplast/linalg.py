"""Sparse storage, direct and iterative solvers shared by both field problems."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.io
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import reverse_cuthill_mckee


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """A factorization or CG iteration met a non-positive pivot or curvature."""


@dataclass(frozen=True)
class SparseMatrix:
    """Compressed sparse row matrix with sorted, unique column indices."""

    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray
    shape: tuple[int, int]
    symmetric: bool = False

    @classmethod
    def from_scipy(cls, A, symmetric: bool = False) -> "SparseMatrix":
        A = sp.csr_matrix(A, dtype=float, copy=True)
        A.sum_duplicates()
        A.sort_indices()
        return cls(A.indptr, A.indices, A.data, A.shape, symmetric)

    @classmethod
    def from_triplets(cls, rows, cols, vals, shape, symmetric: bool = False) -> "SparseMatrix":
        A = sp.coo_matrix((np.asarray(vals, float), (np.asarray(rows), np.asarray(cols))),
                          shape=shape)
        return cls.from_scipy(A.tocsr(), symmetric)

    @property
    def csr(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.data, self.indices, self.indptr), shape=self.shape)

    @property
    def nnz(self) -> int:
        return int(self.indptr[-1])

    def diagonal(self) -> np.ndarray:
        return self.csr.diagonal()

    def transpose(self) -> "SparseMatrix":
        return SparseMatrix.from_scipy(self.csr.T, self.symmetric)

    def __matmul__(self, x):
        return spmv(self, x)


def as_csr(A) -> sp.csr_matrix:
    if isinstance(A, SparseMatrix):
        return A.csr
    if sp.issparse(A):
        return A.tocsr()
    return sp.csr_matrix(np.asarray(A, dtype=float))


def spmv(A, x) -> np.ndarray:
    """Matrix-vector product ``A @ x``."""
    M = as_csr(A)
    x = np.asarray(x, dtype=float)
    if x.shape[0] != M.shape[1]:
        raise ValueError(f"dimension mismatch: matrix {M.shape}, vector {x.shape}")
    return M @ x


def symmetry_error(A) -> float:
    M = as_csr(A)
    scale = abs(M).max() if M.nnz else 1.0
    return float(abs(M - M.T).max() / scale) if M.nnz else 0.0


class BandedCholesky:
    """Cholesky factorization in banded storage after a reverse Cuthill-McKee ordering.

    Raises
    ------
    NotPositiveDefiniteError
        When a non-positive pivot is met.
    """

    def __init__(self, A):
        M = as_csr(A)
        n = M.shape[0]
        if M.shape != (n, n):
            raise ValueError("matrix must be square")
        self.n = n
        self.perm = np.asarray(reverse_cuthill_mckee(M, symmetric_mode=True), dtype=np.int64)
        P = M[self.perm][:, self.perm].tocoo()
        low = P.row >= P.col
        bw = int((P.row[low] - P.col[low]).max()) if low.any() else 0
        ab = np.zeros((bw + 1, n))
        ab[P.row[low] - P.col[low], P.col[low]] = P.data[low]
        self.bandwidth = bw
        try:
            self.cb = scipy.linalg.cholesky_banded(ab, lower=True, check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefiniteError(f"non-positive pivot: {exc}") from None

    def solve(self, b) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        x = np.empty_like(b)
        x[self.perm] = scipy.linalg.cho_solve_banded((self.cb, True), b[self.perm],
                                                     check_finite=False)
        return x


def cholesky_solve(A, b) -> np.ndarray:
    """Solve an SPD system by banded Cholesky with fill-reducing reordering."""
    return BandedCholesky(A).solve(b)


def direct_solve(A, b) -> np.ndarray:
    """Cholesky when the matrix is SPD, sparse LU otherwise."""
    try:
        return cholesky_solve(A, b)
    except NotPositiveDefiniteError:
        return spla.splu(as_csr(A).tocsc()).solve(np.asarray(b, dtype=float))


def pcg_solve(A, b, precond=None, tol: float = 1e-6, x0=None, maxiter: int | None = None):
    """Conjugate gradients with a diagonal preconditioner.

    Parameters
    ----------
    A : sparse matrix, SparseMatrix or LinearOperator-like with ``@``
    b : ndarray
    precond : ndarray, optional
        Diagonal of the preconditioner ``M``; the iteration applies ``M^{-1}``.
        Defaults to the diagonal of ``A``.
    tol : float
        Stop when ``|b - A x| <= tol |b|``.
    x0 : ndarray, optional
    maxiter : int, optional
        Defaults to ``10 n``.

    Returns
    -------
    x : ndarray
    iterations : int

    Raises
    ------
    NotPositiveDefiniteError
        On non-positive curvature ``p^T A p``.
    """
    op = as_csr(A) if (sp.issparse(A) or isinstance(A, (SparseMatrix, np.ndarray))) else A
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    if precond is None:
        precond = op.diagonal()
    dinv = 1.0 / np.asarray(precond, dtype=float)
    maxiter = 10 * n if maxiter is None else maxiter
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - op @ x if x0 is not None else b.copy()
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n), 0
    stop = tol * bnorm
    if np.linalg.norm(r) <= stop:
        return x, 0
    z = dinv * r
    p = z.copy()
    rz = r @ z
    for it in range(1, maxiter + 1):
        Ap = op @ p
        curv = p @ Ap
        if curv <= 0.0:
            raise NotPositiveDefiniteError(f"non-positive curvature {curv:.3e} at iteration {it}")
        alpha = rz / curv
        x += alpha * p
        r -= alpha * Ap
        if np.linalg.norm(r) <= stop:
            return x, it
        z = dinv * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise RuntimeError(f"PCG did not reach tol={tol} in {maxiter} iterations "
                       f"(relative residual {np.linalg.norm(r) / bnorm:.3e})")


def dump_matrix_market(A, path, comment: str = "") -> None:
    """Write ``A`` in MatrixMarket coordinate format."""
    scipy.io.mmwrite(str(path), as_csr(A).tocoo(), comment=comment)
