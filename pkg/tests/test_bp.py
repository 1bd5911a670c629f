from __future__ import annotations

import itertools

import numpy as np
import pytest
from scipy.optimize import linprog

from cmsvkit.bp import BpProblem, solve_bp, verify_optimality
from cmsvkit.linalg import ResidualBallProjector, kernel_basis, spectral_norm


def gaussian(m, n, seed):
    return np.random.default_rng(seed).standard_normal((m, n)) / np.sqrt(m)


def lp_optimum(A, y):
    """min ||z||_1 s.t. Az = y via the split LP (independent reference)."""
    m, n = A.shape
    res = linprog(np.ones(2 * n), A_eq=np.hstack([A, -A]), b_eq=y, bounds=(0, None), method="highs")
    assert res.status == 0
    return res.fun


def test_spectral_norm_matches_svd():
    A = gaussian(7, 13, 0)
    assert spectral_norm(A) == pytest.approx(np.linalg.norm(A, 2), rel=1e-10)


def test_kernel_basis_is_orthonormal_kernel():
    A = gaussian(3, 7, 1)
    K = kernel_basis(A)
    assert K.shape == (7, 4)
    assert np.allclose(A @ K, 0, atol=1e-12)
    assert np.allclose(K.T @ K, np.eye(4), atol=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_ball_projection_matches_cvxpy(seed):
    cp = pytest.importorskip("cvxpy")
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((4, 9))
    y = rng.standard_normal(4)
    v = rng.standard_normal(9) * 3
    for eps in (0.0, 0.3):
        z = cp.Variable(9)
        cons = [A @ z == y] if eps == 0 else [cp.norm(A @ z - y) <= eps]
        cp.Problem(cp.Minimize(cp.sum_squares(z - v)), cons).solve(solver=cp.CLARABEL)
        p = ResidualBallProjector(A, y, eps)(v)
        # the interior-point reference is only accurate to ~1e-5, so compare
        # points loosely and require our distance to be no larger
        assert np.allclose(p, z.value, atol=1e-4)
        assert np.linalg.norm(A @ p - y) <= eps + 1e-10
        assert np.sum((p - v) ** 2) <= np.sum((z.value - v) ** 2) * (1 + 1e-7)


def test_identity_measurements():
    x = np.array([0.0, 1.5, 0.0, -2.0, 0.3])
    res = solve_bp(BpProblem(np.eye(5), x, 0.0))
    assert res.status == "converged"
    assert np.allclose(res.x_hat, x, atol=1e-12)
    rep = verify_optimality(BpProblem(np.eye(5), x, 0.0), res.x_hat, res.dual)
    assert rep["gap"] <= 1e-9 and rep["ok"]


def test_large_noise_ball_gives_zero():
    A = gaussian(5, 12, 2)
    y = np.random.default_rng(2).standard_normal(5)
    res = solve_bp(BpProblem(A, y, float(np.linalg.norm(y)) + 1e-3))
    assert np.all(res.x_hat == 0) and res.status == "converged"


def test_zero_data_trivial():
    res = solve_bp(BpProblem(gaussian(3, 6, 0), np.zeros(3), 0.0))
    assert res.iterations == 0 and np.all(res.x_hat == 0)


def test_two_by_three_unique_vertex():
    A = np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]]) / np.sqrt(2)
    x = np.array([0.0, 0.0, 1.0])
    y = A @ x
    # enumerate basic solutions: the optimum of the LP sits on one of them
    vertices = []
    for size in (1, 2):
        for T in itertools.combinations(range(3), size):
            sub = A[:, T]
            if np.linalg.matrix_rank(sub) < size:
                continue
            coef, *_ = np.linalg.lstsq(sub, y, rcond=None)
            if np.linalg.norm(sub @ coef - y) < 1e-12:
                z = np.zeros(3)
                z[list(T)] = coef
                vertices.append(z)
    best = min(np.abs(z).sum() for z in vertices)
    optimal = [z for z in vertices if np.abs(z).sum() <= best + 1e-12]
    # degenerate bases may repeat a vertex; distinct optimal points must be one
    assert all(np.allclose(z, x, atol=1e-12) for z in optimal)
    res = solve_bp(BpProblem(A, y, 0.0))
    assert np.allclose(res.x_hat, x, atol=1e-9)


def test_perturbed_solution_flagged():
    x = np.array([1.0, 0.0, -1.0])
    problem = BpProblem(np.eye(3), x, 0.0)
    bad = x.copy()
    bad[1] += 0.1
    rep = verify_optimality(problem, bad)
    assert rep["gap_flag"] or not rep["feasible"]
    assert not rep["ok"]


def test_random_instance_gap():
    A = gaussian(10, 30, 5)
    x = np.zeros(30)
    x[[2, 11, 20]] = [1.0, -0.5, 2.0]
    problem = BpProblem(A, A @ x, 0.0)
    res = solve_bp(problem)
    rep = verify_optimality(problem, res.x_hat, res.dual)
    assert res.status == "converged"
    assert rep["gap"] <= 1e-6
    assert res.objective == pytest.approx(lp_optimum(A, A @ x), abs=1e-7)


def test_feasibility_and_optimality_on_many_instances():
    cp = pytest.importorskip("cvxpy")
    rng = np.random.default_rng(42)
    for i in range(100):
        m, n = int(rng.integers(5, 15)), int(rng.integers(15, 40))
        A = rng.standard_normal((m, n)) / np.sqrt(m)
        y = rng.standard_normal(m)
        eps = 0.0 if i % 2 == 0 else float(rng.uniform(0.01, 0.5)) * np.linalg.norm(y)
        res = solve_bp(BpProblem(A, y, eps))
        assert res.status == "converged"
        assert res.residual <= eps + 1e-8
        if i % 10 == 1:
            z = cp.Variable(n)
            cp.Problem(cp.Minimize(cp.norm1(z)), [cp.norm(A @ z - y) <= eps]).solve(solver=cp.CLARABEL)
            assert res.objective <= float(np.abs(z.value).sum()) + 1e-6
        elif i % 10 == 0:
            assert res.objective == pytest.approx(lp_optimum(A, y), abs=1e-6)


def test_best_objective_history_non_increasing():
    A = gaussian(12, 40, 9)
    y = np.random.default_rng(9).standard_normal(12)
    res = solve_bp(BpProblem(A, y, 0.1), record_history=True)
    h = np.array(res.history)
    assert np.all(np.diff(h) <= 1e-12)


def test_epsilon_monotonicity():
    rng = np.random.default_rng(3)
    for _ in range(20):
        A = rng.standard_normal((8, 20)) / np.sqrt(8)
        y = rng.standard_normal(8)
        objs = [solve_bp(BpProblem(A, y, e)).objective for e in (0.1, 0.01, 0.0)]
        assert objs[0] <= objs[1] + 1e-7 and objs[1] <= objs[2] + 1e-7


def test_exact_recovery_classical_regime():
    rng = np.random.default_rng(2024)
    ok = 0
    for _ in range(200):
        A = rng.standard_normal((20, 100)) / np.sqrt(20)
        x = np.zeros(100)
        x[rng.choice(100, 3, replace=False)] = rng.standard_normal(3)
        res = solve_bp(BpProblem(A, A @ x, 0.0))
        ok += np.linalg.norm(res.x_hat - x) <= 1e-6
    assert ok >= 190


def test_infeasible_constraint_reported():
    A = np.array([[1.0, 1.0], [1.0, 1.0]])
    res = solve_bp(BpProblem(A, np.array([1.0, -1.0]), 0.0))
    assert res.status == "infeasible"
