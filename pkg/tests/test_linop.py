import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lmkaczmarz.linop import (
    InnerSolvePolicy,
    LinearMap,
    adjoint_mismatch,
    apply,
    apply_adjoint,
    as_dense,
    estimate_operator_norm,
    resolvent_residual,
    solve_regularized_normal,
)


def _dense_oracle(A, r, alpha):
    n = A.shape[1]
    return np.linalg.solve(A.T @ A + alpha * np.eye(n), A.T @ r)


shapes = st.tuples(st.integers(1, 8), st.integers(1, 8))
alphas = st.floats(1e-3, 1e3)


class TestLinearMap:
    def test_from_matrix_forward_and_adjoint(self):
        A = np.arange(6.0).reshape(2, 3)
        m = LinearMap.from_matrix(A)
        u, w = np.array([1.0, -1.0, 2.0]), np.array([0.5, 3.0])
        np.testing.assert_allclose(apply(m, u), A @ u)
        np.testing.assert_allclose(apply_adjoint(m, w), A.T @ w)
        np.testing.assert_allclose(m @ u, A @ u)

    def test_from_matrix_copies_input(self):
        A = np.eye(2)
        m = LinearMap.from_matrix(A)
        A[0, 0] = 5.0
        np.testing.assert_allclose(as_dense(m), np.eye(2))

    def test_identity_and_zero(self):
        u = np.array([1.0, 2.0, 3.0])
        np.testing.assert_array_equal(LinearMap.identity(3) @ u, u)
        np.testing.assert_array_equal(LinearMap.zero(3, 2) @ u, np.zeros(2))
        np.testing.assert_array_equal(apply_adjoint(LinearMap.zero(3, 2), np.ones(2)), np.zeros(3))

    def test_shape_mismatch_raises(self):
        m = LinearMap.from_matrix(np.ones((2, 3)))
        with pytest.raises(ValueError):
            apply(m, np.ones(2))
        with pytest.raises(ValueError):
            apply_adjoint(m, np.ones(3))
        with pytest.raises(ValueError):
            LinearMap.from_matrix(np.ones(3))

    def test_as_dense_roundtrip(self):
        A = np.random.default_rng(0).standard_normal((4, 5))
        np.testing.assert_allclose(as_dense(LinearMap.from_matrix(A)), A)

    def test_apply_does_not_alias_input(self):
        def fwd(u):
            u *= 2.0
            return u

        m = LinearMap(2, 2, fwd, fwd)
        u = np.ones(2)
        apply(m, u)
        np.testing.assert_array_equal(u, np.ones(2))


class TestAdjointMismatch:
    def test_exact_adjoint_is_roundoff(self):
        A = np.random.default_rng(1).standard_normal((7, 5))
        assert adjoint_mismatch(LinearMap.from_matrix(A)) < 1e-14

    def test_wrong_adjoint_is_detected(self):
        A = np.random.default_rng(1).standard_normal((7, 5))
        bad = LinearMap(5, 7, lambda u: A @ u, lambda w: 1.1 * A.T @ w)
        assert adjoint_mismatch(bad) > 1e-3


class TestInnerSolvePolicy:
    def test_validation(self):
        with pytest.raises(ValueError):
            InnerSolvePolicy(mode="lu")
        with pytest.raises(ValueError):
            InnerSolvePolicy(cg_rel_tol=0.0)
        with pytest.raises(ValueError):
            InnerSolvePolicy(cg_max_iters=0)
        with pytest.raises(ValueError):
            InnerSolvePolicy(dense_threshold=0)

    def test_presets(self):
        assert InnerSolvePolicy.tight().cg_rel_tol == 1e-10
        p = InnerSolvePolicy.three_cg_steps()
        assert p.cg_max_iters == 3 and p.mode == "conjugate-gradient"


class TestSolveRegularizedNormal:
    @pytest.mark.parametrize("shape", [(3, 7), (7, 3), (5, 5)])
    def test_direct_matches_dense_oracle(self, shape):
        rng = np.random.default_rng(2)
        A = rng.standard_normal(shape)
        r = rng.standard_normal(shape[0])
        res = solve_regularized_normal(LinearMap.from_matrix(A), r, 0.3, InnerSolvePolicy(mode="direct-dense"))
        np.testing.assert_allclose(res.h, _dense_oracle(A, r, 0.3), rtol=1e-10, atol=1e-12)
        assert res.converged

    def test_cg_matches_dense_oracle(self):
        rng = np.random.default_rng(3)
        A = rng.standard_normal((20, 30))
        r = rng.standard_normal(20)
        res = solve_regularized_normal(LinearMap.from_matrix(A), r, 0.5, InnerSolvePolicy.tight())
        np.testing.assert_allclose(res.h, _dense_oracle(A, r, 0.5), rtol=1e-8, atol=1e-12)
        assert res.converged and res.relative_residual <= 1e-10

    def test_iteration_cap(self):
        rng = np.random.default_rng(4)
        A = rng.standard_normal((20, 30))
        res = solve_regularized_normal(
            LinearMap.from_matrix(A), rng.standard_normal(20), 1e-3, InnerSolvePolicy.three_cg_steps()
        )
        assert res.iterations <= 3
        assert len(res.residual_history) == res.iterations + 1

    def test_warm_start_at_solution_needs_no_iterations(self):
        rng = np.random.default_rng(5)
        A = rng.standard_normal((6, 4))
        r = rng.standard_normal(6)
        h = _dense_oracle(A, r, 1.0)
        res = solve_regularized_normal(
            LinearMap.from_matrix(A), r, 1.0, InnerSolvePolicy(cg_rel_tol=1e-8), x0=h
        )
        assert res.iterations == 0

    def test_zero_rhs(self):
        res = solve_regularized_normal(LinearMap.from_matrix(np.ones((2, 3))), np.zeros(2), 1.0)
        np.testing.assert_array_equal(res.h, np.zeros(3))

    def test_invalid_arguments(self):
        m = LinearMap.from_matrix(np.ones((2, 3)))
        with pytest.raises(ValueError):
            solve_regularized_normal(m, np.ones(2), 0.0)
        with pytest.raises(ValueError):
            solve_regularized_normal(m, np.array([1.0, np.nan]), 1.0)
        with pytest.raises(ValueError):
            solve_regularized_normal(m, np.ones(3), 1.0)

    def test_direct_refused_above_threshold(self):
        m = LinearMap.from_matrix(np.ones((5, 5)))
        with pytest.raises(ValueError, match="dense_threshold"):
            solve_regularized_normal(m, np.ones(5), 1.0, InnerSolvePolicy(mode="direct-dense", dense_threshold=4))

    @settings(max_examples=40, deadline=None)
    @given(shape=shapes, alpha=alphas, seed=st.integers(0, 2**16))
    def test_solution_satisfies_normal_equations(self, shape, alpha, seed):
        rng = np.random.default_rng(seed)
        A = rng.standard_normal(shape)
        r = rng.standard_normal(shape[0])
        h = solve_regularized_normal(LinearMap.from_matrix(A), r, alpha, InnerSolvePolicy.tight()).h
        lhs = A.T @ (A @ h) + alpha * h
        np.testing.assert_allclose(lhs, A.T @ r, rtol=1e-7, atol=1e-9 * (1 + np.linalg.norm(A.T @ r)))


class TestResolventResidual:
    def test_dense_branch_matches_oracle(self):
        rng = np.random.default_rng(6)
        A = rng.standard_normal((5, 8))
        r = rng.standard_normal(5)
        want = 0.7 * np.linalg.solve(A @ A.T + 0.7 * np.eye(5), r)
        np.testing.assert_allclose(resolvent_residual(LinearMap.from_matrix(A), r, 0.7), want, rtol=1e-12)

    def test_cg_branch_matches_oracle(self):
        rng = np.random.default_rng(7)
        A = rng.standard_normal((12, 9))
        r = rng.standard_normal(12)
        want = 0.7 * np.linalg.solve(A @ A.T + 0.7 * np.eye(12), r)
        pol = InnerSolvePolicy(dense_threshold=4)
        np.testing.assert_allclose(resolvent_residual(LinearMap.from_matrix(A), r, 0.7, pol), want, rtol=1e-9)

    @settings(max_examples=40, deadline=None)
    @given(shape=shapes, alpha=alphas, seed=st.integers(0, 2**16))
    def test_update_form_equals_resolvent_form(self, shape, alpha, seed):
        """A h - r = -alpha (A A^T + alpha I)^{-1} r for the LM update h."""
        rng = np.random.default_rng(seed)
        A = rng.standard_normal(shape)
        r = rng.standard_normal(shape[0])
        m = LinearMap.from_matrix(A)
        h = solve_regularized_normal(m, r, alpha, InnerSolvePolicy(mode="direct-dense")).h
        np.testing.assert_allclose(A @ h - r, -resolvent_residual(m, r, alpha), rtol=1e-8, atol=1e-10 * np.linalg.norm(r))


class TestOperatorNorm:
    def test_matches_svd(self):
        A = np.diag([3.0, 1.0, 0.5]) @ np.random.default_rng(8).standard_normal((3, 3))
        U, s, Vt = np.linalg.svd(A)
        est = estimate_operator_norm(LinearMap.from_matrix(A), iters=200)
        np.testing.assert_allclose(est, s[0], rtol=1e-8)

    def test_lower_estimate(self):
        A = np.random.default_rng(9).standard_normal((10, 6))
        assert estimate_operator_norm(LinearMap.from_matrix(A), iters=3) <= np.linalg.norm(A, 2) * (1 + 1e-12)

    def test_zero_map_and_errors(self):
        assert estimate_operator_norm(LinearMap.zero(3, 2)) == 0.0
        with pytest.raises(ValueError):
            estimate_operator_norm(LinearMap.zero(0, 2))
        with pytest.raises(ValueError):
            estimate_operator_norm(LinearMap.identity(2), iters=0)
