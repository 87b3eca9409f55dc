import unittest
from unittest.mock import patch

import numpy as np

from src.conf.config import settings
from src.exceptions import DegreeTooLowError, DimensionMismatchError, InvalidProblemError, SolverFailureError
from src.moments.core import build_moment_matrix
from src.moments.measures import exact_moments
from src.moments.models import MomentSequence
from src.schemas import DecomposeOptions, Dirac, GaussianProduct, SolverSettings, UniformInterval
from src.services.decomposition import (
    BLOCK_NAMES,
    DecompositionProblem,
    DecompositionSolution,
    DualCertificate,
    SolverStats,
    bound_constants,
    build_primal,
    check_solution,
    solve_decomposition,
    solve_hierarchy,
    verify_certificate,
)
from src.solver.conic import SolveStatus

TIGHT = SolverSettings(eps_gap=1e-9, eps_feas=1e-9, max_iters=150)


class TestProblem(unittest.TestCase):

    def setUp(self):
        self.lam = exact_moments(UniformInterval(a=0.0, b=1.0), 8)
        self.mu = exact_moments(UniformInterval(a=0.1, b=0.7), 8) * 3.0

    def test_truncates_and_normalizes(self):
        problem = DecompositionProblem(self.mu, self.lam, 1.0, 2)
        self.assertEqual(problem.mu.max_degree, 4)
        self.assertEqual(problem.lam.max_degree, 4)
        self.assertAlmostEqual(problem.mu.mass, 1.0)
        raw = DecompositionProblem(self.mu, self.lam, 1.0, 2, normalize_mu=False)
        self.assertAlmostEqual(raw.mu.mass, 3.0)

    def test_validation(self):
        with self.assertRaises(DegreeTooLowError):
            DecompositionProblem(self.mu, self.lam, 1.0, 5)
        with self.assertRaises(DimensionMismatchError):
            DecompositionProblem(exact_moments(GaussianProduct(n=2), 4), self.lam, 1.0, 2)
        for gamma, d in ((0.0, 2), (-1.0, 2), (1.0, -1)):
            with self.assertRaises(InvalidProblemError) as ctx:
                DecompositionProblem(self.mu, self.lam, gamma, d)
            self.assertEqual(ctx.exception.exit_code, 2)
        with self.assertRaises(InvalidProblemError):
            DecompositionProblem(self.mu * 0.0, self.lam, 1.0, 2)
        with self.assertRaises(InvalidProblemError):
            solve_decomposition(DecompositionProblem(self.mu, self.lam * 0.0, 1.0, 2))

    def test_normalize_mu_matches_prenormalized_input(self):
        normalized = DecompositionProblem(self.mu, self.lam, 1.0, 2)
        given = DecompositionProblem(self.mu.truncate(4).normalized(), self.lam, 1.0, 2, normalize_mu=False)
        np.testing.assert_array_equal(normalized.mu.values, given.mu.values)

    def test_hand_built_certificate(self):
        problem = DecompositionProblem(self.mu, self.lam, 1.0, 2, normalize_mu=False)
        size = 3
        gram_p = np.zeros((size, size))
        gram_p[0, 0] = 1.0
        zero = np.zeros((size, size))
        y = MomentSequence.zeros(1, 4, "y")
        stats = SolverStats(SolveStatus.OPTIMAL.value, 0, 0.0, 0.0, 0.0)

        def candidate(p_gram):
            dual = DualCertificate(p_gram, zero, zero, float(p_gram[0, 0]) * problem.mu.mass)
            return DecompositionSolution(2, 1.0, y, problem.mu, problem.lam, problem.mu.mass, dual, stats)

        report = verify_certificate(candidate(gram_p), problem.mu, problem.lam, 1.0, 2, tol=1e-6)
        self.assertTrue(report.passed, report)
        self.assertEqual(report.identity_residual, 0.0)
        self.assertAlmostEqual(report.dual_value, 3.0)

        perturbed = gram_p.copy()
        perturbed[1, 1] += 1e-3
        report = verify_certificate(candidate(perturbed), problem.mu, problem.lam, 1.0, 2, tol=1e-6)
        self.assertFalse(report.passed)
        self.assertAlmostEqual(report.identity_residual, 1e-3)

    def test_primal_layout(self):
        prog = build_primal(DecompositionProblem(self.mu, self.lam, 2.0, 2))
        self.assertEqual(prog.num_vars, 5)
        self.assertEqual([block.name for block in prog.blocks], list(BLOCK_NAMES))
        self.assertEqual([block.size for block in prog.blocks], [3, 3, 3])
        self.assertEqual(prog.objective.tolist(), [1.0, 0.0, 0.0, 0.0, 0.0])
        self.assertEqual(prog.labels[1], "(1,)")
        # y = 0 is feasible: slacks are 0, M(mu), gamma M(lambda)
        slacks = prog.slacks(np.zeros(5))
        np.testing.assert_array_equal(slacks[0], np.zeros((3, 3)))
        np.testing.assert_allclose(slacks[2], 2.0 * build_moment_matrix(self.lam, 2).entries)

    def test_bound_constants(self):
        tau1, tau2 = bound_constants(self.lam, self.lam, 2.0, 2)
        self.assertEqual(tau1, 1.0)
        self.assertEqual(tau2, 2.0)
        wide = exact_moments(UniformInterval(a=0.0, b=3.0), 4)
        self.assertAlmostEqual(bound_constants(wide, self.lam, 1.0, 2)[0], 81.0 / 5.0)


class TestSolve(unittest.TestCase):

    def setUp(self):
        self.lam = exact_moments(UniformInterval(a=0.0, b=1.0), 8)
        self.options = DecomposeOptions(solver=TIGHT)

    def test_mu_equals_lambda(self):
        problem = DecompositionProblem(self.lam, self.lam, 1.0, 3)
        sol = solve_decomposition(problem, self.options)
        self.assertAlmostEqual(sol.rho_d, 1.0, delta=1e-6)
        # only v_{2d} is left free by the optimum
        self.assertLessEqual(np.abs(sol.v.values[:6]).max(), 1e-6)
        self.assertEqual(sol.stats.status, SolveStatus.OPTIMAL.value)

    def test_half_of_lambda(self):
        problem = DecompositionProblem(self.lam, self.lam, 0.5, 3)
        sol = solve_decomposition(problem, self.options)
        self.assertAlmostEqual(sol.rho_d, 0.5, delta=1e-6)
        np.testing.assert_allclose(sol.y.values[:4], 0.5 * problem.lam.values[:4], atol=1e-5)
        np.testing.assert_allclose(sol.u.values[:4], 0.0, atol=1e-5)

    def test_certificate_and_invariants(self):
        mu = exact_moments(UniformInterval(a=0.1, b=0.7), 8) * 0.5 + exact_moments(Dirac(point=[0.4]), 8) * 0.5
        problem = DecompositionProblem(mu, self.lam, 1.0, 3)
        sol = solve_decomposition(problem, self.options)
        self.assertGreater(sol.rho_d, 0.5 - 1e-6)
        self.assertLess(sol.rho_d, 1.0)
        report = verify_certificate(sol, problem.mu, problem.lam, problem.gamma, problem.d, tol=1e-6)
        self.assertTrue(report.passed, report)
        self.assertAlmostEqual(report.dual_value, sol.rho_d, delta=1e-6)
        check = check_solution(problem, sol)
        self.assertTrue(check.holds(1e-6, 1e-6), check)
        self.assertEqual(set(check.min_eigenvalues), {"y", "v", "u"})

    def test_conditioned_matches_monomial(self):
        mu = exact_moments(UniformInterval(a=0.1, b=0.7), 8) * 0.5 + exact_moments(Dirac(point=[0.4]), 8) * 0.5
        problem = DecompositionProblem(mu, self.lam, 1.0, 3)
        plain = solve_decomposition(problem, self.options)
        conditioned = solve_decomposition(problem, DecomposeOptions(solver=TIGHT, condition=True))
        self.assertTrue(conditioned.conditioned)
        self.assertAlmostEqual(plain.rho_d, conditioned.rho_d, delta=1e-6)
        report = verify_certificate(conditioned, problem.mu, problem.lam, problem.gamma, problem.d, tol=1e-6)
        self.assertTrue(report.passed, report)

    def test_conditioning_falls_back_on_singular_lambda(self):
        problem = DecompositionProblem(self.lam, self.lam, 0.5, 2)
        with patch.object(settings, "eps_pd", 1.0):
            with self.assertLogs("src.services.decomposition", "WARNING") as logs:
                sol = solve_decomposition(problem, DecomposeOptions(solver=TIGHT, condition=True))
        self.assertFalse(sol.conditioned)
        self.assertIn("monomial basis", logs.output[0])
        self.assertAlmostEqual(sol.rho_d, 0.5, delta=1e-6)

    def test_failure_keeps_last_iterate(self):
        problem = DecompositionProblem(self.lam, self.lam, 1.0, 3)
        with self.assertRaises(SolverFailureError) as ctx:
            solve_decomposition(problem, DecomposeOptions(solver=SolverSettings(max_iters=2)))
        self.assertEqual(ctx.exception.solution.status, SolveStatus.MAX_ITERS)
        self.assertEqual(ctx.exception.exit_code, 1)


class TestHierarchy(unittest.TestCase):

    def setUp(self):
        self.lam = exact_moments(UniformInterval(a=0.0, b=1.0), 8)
        self.mu = exact_moments(Dirac(point=[0.4]), 8)

    def test_relaxations_tighten(self):
        result = solve_hierarchy(self.mu, self.lam, 1.0, [4, 2, 3], DecomposeOptions(solver=TIGHT))
        self.assertEqual([level.d for level in result.levels], [2, 3, 4])
        self.assertTrue(result.monotone, result.violations)
        rho = [s.rho_d for s in result.solutions]
        self.assertTrue(all(-1e-6 <= r <= 1.0 + 1e-6 for r in rho))
        self.assertGreater(rho[0], rho[-1])

    def test_parallel_levels(self):
        result = solve_hierarchy(self.mu, self.lam, 1.0, [2, 3], DecomposeOptions(solver=TIGHT), max_workers=2)
        self.assertEqual(len(result.solutions), 2)

    def test_failed_level_is_recorded(self):
        real = solve_decomposition

        def flaky(problem, options):
            if problem.d == 3:
                raise SolverFailureError("order 3 relaxation: solver stopped")
            return real(problem, options)

        with patch("src.services.decomposition.solve_decomposition", side_effect=flaky):
            result = solve_hierarchy(self.mu, self.lam, 1.0, [2, 3, 4], DecomposeOptions(solver=TIGHT))
        self.assertEqual([level.d for level in result.solutions], [2, 4])
        self.assertIsNone(result.levels[1].solution)
        self.assertIn("order 3", result.levels[1].error.detail)


if __name__ == '__main__':
    unittest.main()
