import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from chemoplast.qp import (
    QpProblem,
    TrustRegionOpts,
    kkt_residual,
    objective,
    recover_multipliers,
    solve_box_qp,
)
from conftest import brute_force_box_qp, random_box_qp


def test_two_variable_active_lower_bound():
    sol = solve_box_qp(QpProblem(np.eye(2), [-1.0, 2.0], 0.0, np.inf))
    np.testing.assert_allclose(sol.c, [0.0, 2.0], atol=1e-12)
    np.testing.assert_allclose(sol.lambda_min, [1.0, 0.0], atol=1e-10)
    np.testing.assert_allclose(sol.lambda_max, 0.0, atol=1e-12)
    assert sol.kkt_residual <= 1e-8 and sol.converged


def test_scalar_active_upper_bound():
    sol = solve_box_qp(QpProblem(np.array([[2.0]]), [10.0], 0.0, 1.0))
    assert sol.c[0] == pytest.approx(1.0, abs=1e-12)
    assert sol.lambda_max[0] == pytest.approx(8.0, rel=1e-10)


def test_interior_optimum():
    K = np.array([[4.0, 1.0], [1.0, 3.0]])
    f = np.array([1.0, 2.0])
    sol = solve_box_qp(QpProblem(K, f, -10.0, 10.0))
    np.testing.assert_allclose(sol.c, np.linalg.solve(K, f), atol=1e-10)
    assert np.abs(sol.lambda_min).max() < 1e-10 and np.abs(sol.lambda_max).max() < 1e-10


def test_kkt_residual_examples():
    K = np.array([[2.0, 1.0], [1.0, 2.0]])
    f = np.array([3.0, -3.0])
    prob = QpProblem(K, f, 0.0, 1.5)
    free = np.linalg.solve(K, f)  # (3, -3): violates both bounds
    res, _ = kkt_residual(prob, free)
    assert res >= 3.0  # bound overshoot is measured in absolute terms
    # projecting the unconstrained solution is not the constrained solution
    K2 = np.array([[1.0, 0.9], [0.9, 1.0]])
    f2 = np.array([1.0, -0.5])
    prob2 = QpProblem(K2, f2, 0.0, np.inf)
    proj = np.clip(np.linalg.solve(K2, f2), 0.0, np.inf)
    _, exact = brute_force_box_qp(K2, f2, prob2.lower, prob2.upper)
    np.testing.assert_allclose(exact, [1.0, 0.0], atol=1e-12)
    assert not np.allclose(proj, exact)
    assert kkt_residual(prob2, proj)[0] > 1e-3
    assert kkt_residual(prob2, exact)[0] <= 1e-12


def test_pinned_variables_are_eliminated():
    K = np.array([[2.0, -1.0], [-1.0, 2.0]])
    prob = QpProblem(K, [0.0, 1.0], [0.5, -5.0], [0.5, 5.0])
    sol = solve_box_qp(prob)
    np.testing.assert_allclose(sol.c, [0.5, 0.75], atol=1e-12)
    assert sol.converged


def test_problem_validation():
    with pytest.raises(ValueError, match="lower bound exceeds"):
        QpProblem(np.eye(2), [0, 0], [1, 1], [0, 0])
    with pytest.raises(ValueError, match="not symmetric"):
        QpProblem(np.array([[1.0, 2.0], [0.0, 1.0]]), [0, 0], 0, 1)
    with pytest.raises(ValueError, match="shape"):
        QpProblem(np.eye(3), [0, 0], 0, 1)
    with pytest.raises(ValueError):
        TrustRegionOpts(rel_tol=0.0)


def test_brute_force_oracle_on_known_instance():
    obj, x = brute_force_box_qp(np.eye(2), [-1.0, 2.0], [0.0, 0.0], [np.inf, np.inf])
    np.testing.assert_allclose(x, [0.0, 2.0])
    assert obj == pytest.approx(-2.0)


@pytest.mark.parametrize("seed", range(40))
def test_matches_enumeration_oracle(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 9))
    K, f, lo, up = random_box_qp(rng, n)
    sol = solve_box_qp(QpProblem(K, f, lo, up))
    ref_obj, _ = brute_force_box_qp(K, f, lo, up)
    assert objective(K, f, sol.c) == pytest.approx(ref_obj, abs=1e-8 * max(1.0, abs(ref_obj)))
    assert sol.kkt_residual <= 1e-8


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(1e-3, 1e3))
def test_scaling_equivariance(seed, s):
    rng = np.random.default_rng(seed)
    K, f, lo, up = random_box_qp(rng, 6)
    a = solve_box_qp(QpProblem(K, f, lo, up))
    b = solve_box_qp(QpProblem(s * K, s * f, lo, up))
    scale = 1.0 + np.abs(a.c[np.isfinite(a.c)]).max()
    np.testing.assert_allclose(b.c, a.c, atol=1e-8 * scale)
    la = recover_multipliers(QpProblem(K, f, lo, up), a.c)
    lb = recover_multipliers(QpProblem(s * K, s * f, lo, up), a.c)
    np.testing.assert_allclose(lb[0], s * la[0], rtol=1e-12, atol=1e-300)
    np.testing.assert_allclose(lb[1], s * la[1], rtol=1e-12, atol=1e-300)


def test_accepted_steps_never_increase_the_objective():
    rng = np.random.default_rng(11)
    K, f, lo, up = random_box_qp(rng, 10)
    sol = solve_box_qp(QpProblem(K, f, lo, up), TrustRegionOpts(polish=False))
    q = [h[1] for h in sol.history if h[4]]
    assert all(b <= a + 1e-14 * max(1.0, abs(a)) for a, b in zip(q, q[1:]))


def test_large_sparse_laplacian_with_bounds():
    n = 400
    K = sp.diags([np.full(n - 1, -1.0), np.full(n, 2.0), np.full(n - 1, -1.0)], [-1, 0, 1]).tocsr()
    f = np.sin(np.linspace(0, 6 * np.pi, n)) * 0.01
    sol = solve_box_qp(QpProblem(K, f, 0.0, np.inf))
    assert sol.converged and sol.c.min() >= 0.0
    assert sol.pcg_iterations_total > 0 and sol.outer_iterations > 0
