import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from edgirls.errors import ConvergenceFailure, DimensionMismatch, NonFiniteIterate
from edgirls.linalg import (UNSET, LinOp, SpectralState, cg_solve, eps_min,
                            eval_smoothed_logdet, operator_norm, smoothed_log,
                            sym_matrix, truncated_eig)

from oracles import random_sym


def test_sym_matrix_enforces_exact_symmetry():
    assert np.array_equal(sym_matrix([[1, 2], [2, 3]]), [[1, 2], [2, 3]])
    X = sym_matrix(np.random.default_rng(0).standard_normal((5, 5)))
    assert np.array_equal(X, X.T)
    with pytest.raises(NonFiniteIterate):
        sym_matrix([[np.nan, 0], [0, 1]])
    with pytest.raises(DimensionMismatch):
        sym_matrix(np.ones((2, 3)))


# ---- cg_solve


def test_cg_identity_one_iteration():
    b = np.array([3.0, -1.0, 2.0])
    res = cg_solve(LinOp.identity(3), b)
    assert res.converged and res.iterations == 1
    np.testing.assert_allclose(res.x, b)


def test_cg_diagonal():
    op = LinOp.from_dense(np.diag([1.0, 2.0, 3.0]))
    res = cg_solve(op, np.array([1.0, 2.0, 3.0]))
    np.testing.assert_allclose(res.x, np.ones(3), atol=1e-12)


@given(st.integers(0, 2**32 - 1))
def test_cg_matches_dense_solve(seed):
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((20, 20))
    A = B @ B.T + 20 * np.eye(20)
    b = rng.standard_normal(20)
    res = cg_solve(LinOp.from_dense(A), b, tol=1e-12)
    x = np.linalg.solve(A, b)
    assert res.converged
    assert np.linalg.norm(res.x - x) <= 1e-8 * np.linalg.norm(x)


def test_cg_flags_nonconvergence_instead_of_raising():
    A = np.diag(np.logspace(0, 8, 50))
    res = cg_solve(LinOp.from_dense(A), np.ones(50), tol=1e-14, max_iter=3)
    assert not res.converged
    assert res.iterations == 3
    assert res.relative_residual > 1e-14


def test_cg_zero_rhs():
    res = cg_solve(LinOp.identity(4), np.zeros(4))
    assert res.converged and not res.x.any()


def test_cg_nonfinite_raises():
    op = LinOp(2, 2, lambda v: v * np.nan, True)
    with pytest.raises(NonFiniteIterate):
        cg_solve(op, np.ones(2))
    with pytest.raises(NonFiniteIterate):
        cg_solve(LinOp.identity(2), np.array([np.inf, 1.0]))


def test_cg_warm_start_at_solution_takes_no_iterations():
    A = np.diag([2.0, 5.0])
    res = cg_solve(LinOp.from_dense(A), np.array([2.0, 5.0]), x0=np.ones(2))
    assert res.iterations == 0 and res.converged


# ---- truncated_eig


def test_eig_identity():
    _, lam = truncated_eig(LinOp.identity(7), 1)
    assert lam[0] == pytest.approx(1.0)


def test_eig_rank_one():
    u = np.array([1.0, 1.0, 1.0, 1.0])  # norm 2
    U, lam = truncated_eig(np.outer(u, u), 1)
    assert lam[0] == pytest.approx(4.0)
    assert abs(U[:, 0] @ (u / 2)) == pytest.approx(1.0)


@given(st.integers(0, 2**32 - 1), st.integers(1, 8))
def test_eig_matches_dense_oracle(seed, k):
    rng = np.random.default_rng(seed)
    X = random_sym(rng, 30)
    U, lam, res = truncated_eig(X, k, tol=1e-11, seed=seed, return_residuals=True)
    ref = np.linalg.eigvalsh(X)
    ref = ref[np.argsort(-np.abs(ref), kind="stable")][:k]
    np.testing.assert_allclose(np.abs(lam), np.abs(ref), rtol=0, atol=1e-9 * abs(ref[0]))
    np.testing.assert_allclose(U.T @ U, np.eye(k), atol=1e-10)
    R = X @ U - U * lam
    assert np.all(np.linalg.norm(R, axis=0) <= 1e-9 * abs(lam[0]))


def test_eig_full_spectrum():
    X = random_sym(np.random.default_rng(3), 15)
    _, lam = truncated_eig(X, 15)
    np.testing.assert_allclose(np.sort(lam), np.linalg.eigvalsh(X), atol=1e-9 * np.abs(lam).max())


@pytest.mark.parametrize("noise", [0.0, 1e-9, 1e-6])
def test_eig_nearly_low_rank_operator(noise):
    # a gap of ~1e11 between the leading block and the rest exercises the
    # re-orthogonalization of nearly dependent Krylov blocks
    rng = np.random.default_rng(1)
    n = 300
    Q, _ = np.linalg.qr(rng.standard_normal((n, 5)))
    X = Q @ np.diag([568.0, 523.0, 518.0, 483.0, 437.0]) @ Q.T + noise * random_sym(rng, n)
    _, lam = truncated_eig(X, 6, seed=7)
    ref = np.linalg.eigvalsh(X)
    ref = ref[np.argsort(-np.abs(ref))][:6]
    np.testing.assert_allclose(lam[:5], ref[:5], rtol=1e-10)
    assert abs(lam[5]) <= 568.0 * 1e-9 + 10 * noise * np.sqrt(n)


def test_eig_deterministic_under_seed():
    X = random_sym(np.random.default_rng(0), 40)
    a = truncated_eig(X, 3, seed=11)
    b = truncated_eig(X, 3, seed=11)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_eig_reports_failure_when_krylov_space_is_capped():
    X = np.diag(np.linspace(1.0, 1.0 + 1e-3, 200))
    with pytest.raises(ConvergenceFailure):
        truncated_eig(X, 2, tol=1e-14, max_dim=8)


def test_eig_bad_k():
    with pytest.raises(ValueError):
        truncated_eig(np.eye(3), 4)


# ---- smoothed objective


def test_smoothed_log_branches():
    assert smoothed_log(0.3, 0.3) == pytest.approx(math.log(0.3))
    assert smoothed_log(0.0, 1.0) == pytest.approx(-0.5)
    assert eval_smoothed_logdet([2.0, 0.0], 1.0) == pytest.approx(math.log(2.0) - 0.5)


@pytest.mark.parametrize("eps", [1e-3, 0.5, 7.0])
def test_smoothed_log_is_c1_at_eps(eps):
    h = 1e-6 * eps
    left = (smoothed_log(eps, eps) - smoothed_log(eps - h, eps)) / h
    right = (smoothed_log(eps + h, eps) - smoothed_log(eps, eps)) / h
    assert abs(left - right) * eps <= 1e-5


def test_smoothed_log_requires_positive_eps():
    with pytest.raises(ValueError):
        eval_smoothed_logdet([1.0], 0.0)


# ---- sentinel and state


def test_unset_sentinel():
    assert eps_min(UNSET, 2.5) == 2.5
    assert eps_min(1.0, 2.5) == 1.0
    import pickle
    assert pickle.loads(pickle.dumps(UNSET)) is UNSET


def test_spectral_state_validation():
    U = np.linalg.qr(np.random.default_rng(0).standard_normal((6, 2)))[0]
    st_ = SpectralState.from_eig(U, [3.0, -2.0], 1.0)
    assert st_.rank == 2 and st_.n == 6
    np.testing.assert_array_equal(st_.gamma, [1.0, -1.0])
    with pytest.raises(ValueError):
        SpectralState(U, [2.0, 3.0], [1, 1], 1.0)  # unsorted
    with pytest.raises(ValueError):
        SpectralState(U, [3.0, 2.0], [1, 1], 2.5)  # sigma below eps
    with pytest.raises(DimensionMismatch):
        SpectralState(U, [3.0], [1], 1.0)


# ---- operator norm and linop contract


@pytest.mark.parametrize("A, expected", [(np.eye(4), 1.0), (np.diag([3.0, 1.0]), 3.0)])
def test_operator_norm_simple(A, expected):
    assert operator_norm(LinOp.from_dense(A)) == pytest.approx(expected, rel=1e-6)


def test_operator_norm_random_vs_dense():
    rng = np.random.default_rng(5)
    A = rng.standard_normal((20, 12))
    est = operator_norm(LinOp.from_dense(A), iters=2000, rtol=1e-10)
    assert est == pytest.approx(np.linalg.norm(A, 2), rel=1e-3)


@given(st.integers(0, 2**32 - 1))
def test_linop_linearity_and_self_adjointness(seed):
    rng = np.random.default_rng(seed)
    op = LinOp.from_dense(random_sym(rng, 9))
    u, v = rng.standard_normal((2, 9))
    a, b = rng.standard_normal(2)
    lhs = op(a * u + b * v)
    assert np.linalg.norm(lhs - a * op(u) - b * op(v)) <= 1e-10 * (
        np.linalg.norm(op(u)) + np.linalg.norm(op(v)))
    assert op.is_self_adjoint
    assert op(u) @ v == pytest.approx(u @ op(v), rel=1e-10)
