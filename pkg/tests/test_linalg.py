import numpy as np
import pytest
import scipy.io
import scipy.sparse as sp

from chemoplast.linalg import (
    BandedCholesky,
    NotPositiveDefiniteError,
    SparseMatrix,
    cholesky_solve,
    direct_solve,
    dump_matrix_market,
    pcg_solve,
    spmv,
    symmetry_error,
)


def random_spd(rng, n, density=0.2, shift=1.0):
    A = sp.random(n, n, density=density, random_state=np.random.RandomState(rng.integers(1 << 31)))
    A = (A @ A.T + shift * sp.identity(n)).tocsr()
    return A


def test_storage_is_sorted_and_unique():
    m = SparseMatrix.from_triplets([0, 0, 1, 0], [1, 0, 1, 1], [1.0, 2.0, 3.0, 4.0], (2, 2))
    assert m.nnz == 3
    np.testing.assert_array_equal(m.indices, [0, 1, 1])
    np.testing.assert_array_equal(m.csr.toarray(), [[2.0, 5.0], [0.0, 3.0]])


def test_spmv_identity_and_dense_oracle():
    rng = np.random.default_rng(0)
    x = rng.normal(size=10)
    np.testing.assert_array_equal(spmv(sp.identity(10), x), x)
    D = rng.normal(size=(10, 10))
    D[rng.uniform(size=D.shape) < 0.5] = 0.0
    A = SparseMatrix.from_scipy(D)
    np.testing.assert_allclose(A @ x, D @ x, rtol=1e-14, atol=1e-14 * np.abs(D).sum())


def test_spmv_adjoint_identity():
    rng = np.random.default_rng(1)
    A = SparseMatrix.from_scipy(sp.random(30, 20, density=0.3, random_state=1))
    x, y = rng.normal(size=20), rng.normal(size=30)
    lhs = (A @ x) @ y
    rhs = x @ (A.transpose() @ y)
    assert abs(lhs - rhs) <= 1e-12 * max(abs(lhs), 1.0)


def test_spmv_dimension_mismatch():
    with pytest.raises(ValueError, match="dimension"):
        spmv(sp.identity(3), np.ones(4))


def test_cholesky_diagonal_and_random():
    d = np.array([2.0, 4.0, 8.0])
    np.testing.assert_allclose(cholesky_solve(sp.diags(d), np.ones(3)), 1.0 / d)
    rng = np.random.default_rng(2)
    A = random_spd(rng, 100, 0.05)
    b = rng.normal(size=100)
    x = cholesky_solve(A, b)
    assert np.linalg.norm(A @ x - b) <= 1e-12 * np.linalg.norm(b) * np.linalg.cond(A.toarray())
    y, _ = pcg_solve(A, b, tol=1e-14)
    np.testing.assert_allclose(x, y, rtol=1e-8, atol=1e-8 * np.abs(x).max())


def test_cholesky_bandwidth_is_reduced_by_reordering():
    n = 40
    A = sp.diags([np.full(n - 1, -1.0), np.full(n, 2.5), np.full(n - 1, -1.0)], [-1, 0, 1])
    p = np.random.default_rng(3).permutation(n)
    B = A.tocsr()[p][:, p]
    assert BandedCholesky(B).bandwidth <= 2


def test_indefinite_matrix_raises():
    A = sp.diags([1.0, -1.0, 2.0])
    with pytest.raises(NotPositiveDefiniteError):
        cholesky_solve(A, np.ones(3))
    with pytest.raises(NotPositiveDefiniteError):
        pcg_solve(A, np.array([0.0, 1.0, 0.0]))
    # the LU fallback still solves it
    np.testing.assert_allclose(direct_solve(A, np.ones(3)), [1.0, -1.0, 0.5])


def test_pcg_examples():
    x, its = pcg_solve(sp.identity(8), np.arange(8.0))
    assert its == 1
    d = np.arange(1.0, 9.0)
    x, its = pcg_solve(sp.diags(d), np.ones(8), precond=d)
    assert its == 1
    np.testing.assert_allclose(x, 1.0 / d)
    assert pcg_solve(sp.identity(3), np.zeros(3)) == (pytest.approx(np.zeros(3)), 0)


def test_pcg_matches_dense_solve():
    rng = np.random.default_rng(4)
    M = rng.normal(size=(50, 50))
    A = M @ M.T + 50 * np.eye(50)
    b = rng.normal(size=50)
    tol = 1e-10
    x, _ = pcg_solve(A, b, tol=tol)
    ref = np.linalg.solve(A, b)
    assert np.linalg.norm(A @ x - b) <= tol * np.linalg.norm(b)
    assert np.linalg.norm(x - ref) <= tol * np.linalg.cond(A) * np.linalg.norm(ref)


def test_pcg_reports_non_convergence():
    A = sp.diags(np.logspace(0, 8, 200))
    with pytest.raises(RuntimeError, match="did not reach"):
        pcg_solve(A, np.ones(200), precond=np.ones(200), tol=1e-14, maxiter=3)


def test_kernels_are_deterministic():
    rng = np.random.default_rng(5)
    A = random_spd(rng, 60)
    b = rng.normal(size=60)
    a1, a2 = pcg_solve(A, b, tol=1e-12), pcg_solve(A, b, tol=1e-12)
    np.testing.assert_array_equal(a1[0], a2[0])
    np.testing.assert_array_equal(cholesky_solve(A, b), cholesky_solve(A, b))


def test_symmetry_error_and_matrix_market_dump(tmp_path):
    A = sp.csr_matrix(np.array([[2.0, 1.0], [1.0, 3.0]]))
    assert symmetry_error(A) == 0.0
    assert symmetry_error(sp.csr_matrix([[1.0, 2.0], [0.0, 1.0]])) == pytest.approx(1.0)
    p = tmp_path / "K.mtx"
    dump_matrix_market(A, p, comment="test")
    np.testing.assert_array_equal(scipy.io.mmread(str(p)).toarray(), A.toarray())
