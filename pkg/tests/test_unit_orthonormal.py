import unittest

import numpy as np

from src.exceptions import DimensionMismatchError, NotPositiveDefiniteError
from src.moments.core import build_moment_matrix
from src.moments.measures import exact_moments
from src.schemas import Dirac, GaussianProduct, UniformInterval
from src.services.decomposition import DecompositionProblem, build_primal
from src.services.orthonormal import condition_report, dual_to_monomial, orthonormal_basis, transform_program


class TestOrthonormalBasis(unittest.TestCase):

    def test_legendre(self):
        lam = exact_moments(UniformInterval(a=-1.0, b=1.0), 4)
        basis = orthonormal_basis(lam, 2)
        M = build_moment_matrix(lam, 2).entries
        np.testing.assert_allclose(basis.L @ M @ basis.L.T, np.eye(3), atol=1e-10)
        np.testing.assert_allclose(np.triu(basis.L, 1), 0.0)
        # 1, sqrt(3) x, sqrt(5) (3x^2 - 1) / 2
        np.testing.assert_allclose(basis.L[0], [1.0, 0.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(basis.L[1], [0.0, np.sqrt(3.0), 0.0], atol=1e-12)
        np.testing.assert_allclose(basis.L[2], [-np.sqrt(5.0) / 2, 0.0, 1.5 * np.sqrt(5.0)], atol=1e-10)
        self.assertLess(basis.orthogonality_error, 1e-10)

    def test_ill_conditioned_hankel(self):
        lam = exact_moments(UniformInterval(a=0.0, b=1.0), 12)
        basis = orthonormal_basis(lam, 6)
        M = build_moment_matrix(lam, 6).entries
        self.assertGreater(np.linalg.cond(M), 1e8)
        np.testing.assert_allclose(basis.L @ M @ basis.L.T, np.eye(7), atol=1e-6)

    def test_two_dimensional(self):
        lam = exact_moments(GaussianProduct(n=2), 6)
        basis = orthonormal_basis(lam, 3)
        self.assertEqual(basis.size, 10)
        self.assertLess(basis.orthogonality_error, 1e-10)

    def test_singular_lambda(self):
        with self.assertRaises(NotPositiveDefiniteError) as ctx:
            orthonormal_basis(exact_moments(Dirac(point=[0.4]), 4), 2)
        self.assertLess(ctx.exception.eigenvalue, 1e-12)


class TestTransform(unittest.TestCase):

    def setUp(self):
        mu = exact_moments(UniformInterval(a=0.1, b=0.7), 6)
        lam = exact_moments(UniformInterval(a=0.0, b=1.0), 6)
        self.problem = DecompositionProblem(mu, lam, 1.5, 3)
        self.prog = build_primal(self.problem)
        self.basis = orthonormal_basis(self.problem.lam, 3)

    def test_lambda_block_becomes_identity(self):
        transformed = transform_program(self.prog, self.basis)
        lam_block = transformed.blocks[2]
        np.testing.assert_allclose(lam_block.G, 1.5 * np.eye(4), atol=1e-9)
        report = {row.name: row for row in condition_report(self.prog, transformed)}
        self.assertAlmostEqual(report["lambda"].after, 1.0, delta=1e-8)
        self.assertGreater(report["lambda"].before, 1e3)
        self.assertEqual(report["moment"].before, np.inf)

    def test_feasible_set_unchanged(self):
        transformed = transform_program(self.prog, self.basis)
        y = 0.5 * self.problem.lam.values
        for before, after in zip(self.prog.slacks(y), transformed.slacks(y)):
            np.testing.assert_allclose(after, self.basis.L @ before @ self.basis.L.T, atol=1e-9)

    def test_dual_pairing_preserved(self):
        transformed = transform_program(self.prog, self.basis)
        rng = np.random.default_rng(3)
        R = rng.normal(size=(4, 4))
        Z = R @ R.T
        back = dual_to_monomial(Z, self.basis)
        for before, after in zip(self.prog.blocks, transformed.blocks):
            self.assertAlmostEqual(np.vdot(after.G, Z), np.vdot(before.G, back), delta=1e-8)
            np.testing.assert_allclose(after.adjoint(Z), before.adjoint(back), atol=1e-7)

    def test_size_mismatch(self):
        with self.assertRaises(DimensionMismatchError):
            transform_program(self.prog, orthonormal_basis(self.problem.lam, 2))


if __name__ == '__main__':
    unittest.main()
