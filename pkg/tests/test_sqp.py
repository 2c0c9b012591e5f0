"""Outer SQP loop: merit and penalty helpers against hand values, the
damped BFGS update against a positive-definiteness sweep, and the
multistart driver against known sparsest solutions of the builtins."""

import numpy as np
import pytest

from tcpsolve import (SPARSITY_TOL, SQPConfig, TCPProblem, Tensor, builtin,
                      multistart_sparse, sqp_solve, verify_solution)
from tcpsolve.sqp import (constraint_jacobian, constraint_value, damped_bfgs,
                          infeasibility, least_squares_multipliers, merit,
                          update_penalty)


class TestConstraintValue:

    def test_reference_point_is_feasible(self):
        problem = builtin("ex5_1")
        h = constraint_value(problem, np.array([0.0, 0.5]))
        np.testing.assert_allclose(h, [0.0, 0.0], atol=1e-15)

    def test_origin_gives_minus_q(self):
        problem = builtin("ex5_1")
        h = constraint_value(problem, np.zeros(2))
        np.testing.assert_array_equal(h, -problem.q)

    def test_non_reference_feasible_point(self):
        # the first benchmark also vanishes at the dense point (1, 1)
        problem = builtin("ex3_1")
        h = constraint_value(problem, np.array([1.0, 1.0]))
        np.testing.assert_allclose(h, [0.0, 0.0], atol=1e-15)

    def test_jacobian_matches_tensor_jacobian(self):
        problem = builtin("ex5_3")
        rng = np.random.default_rng(3)
        x = rng.uniform(0.0, 2.0, problem.dim)
        np.testing.assert_array_equal(constraint_jacobian(problem, x),
                                      problem.tensor.jacobian(x))


class TestMerit:

    def test_feasible_point_reduces_to_objective(self):
        x = np.array([0.3, 0.7, 0.0])
        h = np.zeros(3)
        assert merit(x, h, 0.01) == pytest.approx(1.0)
        assert merit(x, h, 123.0) == pytest.approx(1.0)

    def test_reference_solution_value(self):
        problem = builtin("ex5_1")
        x = np.array([0.0, 0.5])
        h = constraint_value(problem, x)
        assert merit(x, h, 0.8) == pytest.approx(0.5)

    def test_penalizes_infeasibility_and_negativity(self):
        x = np.array([-1.0, 0.0])
        h = np.array([2.0, 0.0])
        assert infeasibility(x, h) == pytest.approx(3.0)
        assert merit(x, h, 0.5) == pytest.approx(5.0)

    def test_smaller_sigma_weights_infeasibility_harder(self):
        x = np.array([0.5, 0.5])
        h = np.array([0.1, -0.1])
        assert merit(x, h, 0.1) > merit(x, h, 1.0)


class TestUpdatePenalty:

    def test_kept_while_dominating(self):
        # 1/0.1 = 10 >= 3 + 1, so the penalty stays put
        assert update_penalty(0.1, np.array([3.0]), np.array([0.0]), 1.0) \
            == pytest.approx(0.1)

    def test_tightened_when_overtaken(self):
        # 1/1 < 3 + 1 forces sigma = 1/(3 + 2)
        assert update_penalty(1.0, np.array([3.0]), np.array([0.0]), 1.0) \
            == pytest.approx(0.2)

    def test_zero_multipliers_still_bounded(self):
        # 1/2 < 0 + 1 forces sigma = 1/(0 + 2)
        assert update_penalty(2.0, np.array([0.0]), np.array([0.0]), 1.0) \
            == pytest.approx(0.5)

    def test_never_increases(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            sigma = float(rng.uniform(0.01, 2.0))
            mu = rng.standard_normal(3) * rng.uniform(0.0, 20.0)
            lam = rng.standard_normal(3) * rng.uniform(0.0, 20.0)
            new = update_penalty(sigma, mu, lam, 1.0)
            assert new <= sigma + 1e-15
            # after the update 1/sigma dominates the multiplier norm
            tau = max(np.max(np.abs(mu)), np.max(np.abs(lam)))
            assert 1.0 / new >= tau


class TestLeastSquaresMultipliers:

    def test_identity_constraint_splits_evenly(self):
        mu, lam = least_squares_multipliers(np.eye(3))
        np.testing.assert_allclose(mu, np.full(3, 0.5), atol=1e-14)
        np.testing.assert_allclose(lam, np.full(3, 0.5), atol=1e-14)

    def test_scaled_identity(self):
        mu, lam = least_squares_multipliers(np.array([[2.0]]))
        assert mu[0] == pytest.approx(0.4)
        assert lam[0] == pytest.approx(0.2)

    def test_zero_matrix_puts_everything_on_bounds(self):
        mu, lam = least_squares_multipliers(np.zeros((3, 3)))
        np.testing.assert_array_equal(mu, np.zeros(3))
        np.testing.assert_array_equal(lam, np.ones(3))

    def test_stationarity_identity_holds(self):
        # aeq' mu + lam = e is the gradient condition the pair must satisfy
        rng = np.random.default_rng(5)
        for _ in range(50):
            n = int(rng.integers(1, 6))
            aeq = rng.standard_normal((n, n)) * rng.uniform(0.0, 10.0)
            mu, lam = least_squares_multipliers(aeq)
            np.testing.assert_allclose(aeq.T @ mu + lam, np.ones(n),
                                       rtol=0.0, atol=1e-10)


class TestDampedBFGS:

    def test_consistent_pair_is_fixed_point(self):
        b = np.eye(2)
        s = np.array([1.0, 0.0])
        updated = damped_bfgs(b, s, s)
        np.testing.assert_allclose(updated, np.eye(2), atol=1e-15)

    def test_negative_curvature_is_damped(self):
        # s'y = -1 < 0.2 s'Bs triggers theta = 0.4, z = (0.2, 0)
        b = np.eye(2)
        s = np.array([1.0, 0.0])
        y = np.array([-1.0, 0.0])
        updated = damped_bfgs(b, s, y)
        np.testing.assert_allclose(updated, np.diag([0.2, 1.0]), atol=1e-14)

    def test_tiny_step_returns_input(self):
        b = np.diag([2.0, 3.0])
        s = np.full(2, 1e-16)
        assert damped_bfgs(b, s, np.ones(2)) is b

    def test_nonpositive_curvature_matrix_untouched(self):
        b = -np.eye(2)
        s = np.array([1.0, 0.0])
        assert damped_bfgs(b, s, np.ones(2)) is b

    def test_update_stays_positive_definite(self):
        rng = np.random.default_rng(29)
        for _ in range(200):
            n = int(rng.integers(1, 6))
            m_mat = rng.standard_normal((n, n))
            b = m_mat @ m_mat.T + 0.1 * np.eye(n)
            s = rng.standard_normal(n)
            y = rng.standard_normal(n)
            updated = damped_bfgs(b, s, y)
            np.testing.assert_allclose(updated, updated.T, atol=1e-12)
            assert np.min(np.linalg.eigvalsh(updated)) > 0.0


class TestVerifySolution:

    def test_exact_solution_has_zero_violation(self):
        problem = builtin("ex5_1")
        check = verify_solution(problem, np.array([0.0, 0.5]))
        assert check.max_violation == 0.0
        assert check.is_valid()

    def test_dense_solution_is_still_valid(self):
        problem = builtin("ex3_1")
        check = verify_solution(problem, np.array([1.0, 1.0]))
        assert check.min_x == pytest.approx(1.0)
        assert check.is_valid()

    def test_origin_fails_when_q_is_nonzero(self):
        problem = builtin("ex5_1")
        check = verify_solution(problem, np.zeros(2))
        assert check.min_slack == pytest.approx(-1.0)
        assert check.max_violation == pytest.approx(1.0)
        assert not check.is_valid()

    def test_complementarity_violation_detected(self):
        # x2 > 0 with positive slack in the same coordinate
        problem = builtin("ex5_1")
        check = verify_solution(problem, np.array([0.0, 1.0]))
        assert check.complementarity == pytest.approx(7.0)
        assert not check.is_valid()


class TestSQPSolve:

    def test_converges_to_sparse_solution(self):
        problem = builtin("ex5_1")
        report = sqp_solve(problem, np.array([0.9, 0.9]))
        assert report.converged
        np.testing.assert_allclose(report.x, [0.0, 0.5], atol=1e-6)
        assert report.l0 == 1

    def test_report_satisfies_both_systems(self):
        # the equality reformulation and the complementarity system agree
        # at any reported KKT point
        cfg = SQPConfig()
        problem = builtin("ex5_2")
        report = sqp_solve(problem, np.array([0.7, 0.3]), config=cfg)
        assert report.converged
        assert report.equation_residual <= cfg.eps2
        assert report.tcp_residual <= cfg.eps2
        check = verify_solution(problem, report.x)
        assert check.max_violation <= cfg.eps2

    def test_penalty_is_monotone_along_trace(self):
        cfg = SQPConfig(keep_trace=True)
        report = sqp_solve(problem=builtin("ex5_1"),
                           x0=np.array([0.4, 0.8]), config=cfg)
        assert report.converged
        # the final iteration only runs the termination test, so it leaves
        # no step record behind
        sigmas = [rec.sigma for rec in report.trace]
        assert len(sigmas) == report.iterations - 1
        assert all(b <= a + 1e-15 for a, b in zip(sigmas, sigmas[1:]))

    def test_iteration_budget_respected(self):
        cfg = SQPConfig(max_iter=3)
        report = sqp_solve(builtin("ex5_3"), np.full(3, 0.9), config=cfg)
        assert report.iterations <= 3
        if not report.converged:
            assert report.status in ("max_iter", "linesearch_fail", "qp_fail")

    def test_l0_counts_support_above_tolerance(self):
        problem = builtin("ex5_1")
        report = sqp_solve(problem, np.array([0.9, 0.9]))
        assert report.l0 == int(np.sum(report.x > SPARSITY_TOL))


class TestMultistart:

    def test_deterministic_reports(self):
        problem = builtin("ex5_1")
        first = multistart_sparse(problem, n_starts=4, seed=7)
        second = multistart_sparse(problem, n_starts=4, seed=7)
        assert first.success_rate == second.success_rate
        for a, b in zip(first.reports, second.reports):
            np.testing.assert_array_equal(a.x, b.x)
            np.testing.assert_array_equal(a.mu, b.mu)
            np.testing.assert_array_equal(a.lam, b.lam)
            np.testing.assert_array_equal(a.start_point, b.start_point)
            assert a.status == b.status
            assert a.iterations == b.iterations
            assert a.objective == b.objective

    def test_seed_changes_starts(self):
        problem = builtin("ex5_1")
        first = multistart_sparse(problem, n_starts=2, seed=1)
        second = multistart_sparse(problem, n_starts=2, seed=2)
        assert not np.array_equal(first.reports[0].start_point,
                                  second.reports[0].start_point)

    def test_prefers_sparse_over_dense_solution(self):
        # two complementarity solutions exist; the selector must keep the
        # one-support point, not the dense (1, 1)
        result = multistart_sparse(builtin("ex3_1"), n_starts=6, seed=42)
        assert result.best.l0 == 1
        np.testing.assert_allclose(result.best.x, [0.0, 1.0], atol=1e-6)

    def test_zero_q_short_circuits(self):
        problem = TCPProblem(
            tensor=builtin("ex2_3"), q=np.zeros(2), name="zero-q")
        result = multistart_sparse(problem, n_starts=5, seed=0)
        assert result.success_rate == 1.0
        assert len(result.reports) == 1
        best = result.best
        np.testing.assert_array_equal(best.x, np.zeros(2))
        assert best.l0 == 0
        assert best.iterations == 0
        assert any("zero vector" in note for note in best.notes)

    def test_uncertified_tensor_is_flagged(self):
        # all-ones tensor is not a P-tensor, so the reformulation note
        # warns that converged points may not be sparsest
        tensor = Tensor.from_dense(np.ones((2, 2, 2)))
        problem = TCPProblem(tensor=tensor, q=np.array([1.0, 1.0]),
                             name="dense-ones")
        result = multistart_sparse(problem, n_starts=2, seed=3)
        assert any("not certified" in note for note in result.notes)

    def test_success_rate_counts_converged_runs(self):
        result = multistart_sparse(builtin("ex5_1"), n_starts=5, seed=42)
        kkt = sum(1 for r in result.reports
                  if r.converged and r.tcp_residual <= SQPConfig().eps2)
        assert result.success_rate == pytest.approx(kkt / 5)
        assert result.success_rate > 0.0
