import json
import tempfile
import unittest
from pathlib import Path

import numpy as np

from src.exceptions import UnknownExampleError
from src.moments.measures import exact_moments
from src.schemas import DecomposeOptions, Dirac, GaussianProduct, MomentRow, RunReport, SolverSettings, UniformInterval
from src.services import examples
from src.services.reports import (DecomposeRequest, decompose_and_report, max_relative_error, moment_row,
                                  relative_errors, render_table, write_report)

OPTIONS = DecomposeOptions(solver=SolverSettings(eps_gap=1e-8, eps_feas=1e-8), condition=True)


class TestRows(unittest.TestCase):

    def test_relative_errors(self):
        self.assertEqual(relative_errors([1.0, 0.5, 0.1], [1.0, 0.4, 0.0])[:1], [0.0])
        self.assertAlmostEqual(relative_errors([0.5], [0.4])[0], 0.25)
        self.assertIsNone(relative_errors([0.1], [0.0])[0])

    def test_moment_row_normalizes(self):
        z = exact_moments(Dirac(point=[0.4]), 6) * 0.25
        row = moment_row("v/v0", z, 4, exact_moments(Dirac(point=[0.4]), 6))
        self.assertEqual(row.alphas, [[0], [1], [2], [3], [4]])
        self.assertAlmostEqual(row.values[1], 0.4)
        self.assertAlmostEqual(max_relative_error(row), 0.0)

    def test_moment_row_in_the_plane(self):
        row = moment_row("y/y0", exact_moments(GaussianProduct(n=2), 8), 4)
        self.assertEqual(len(row.values), 15)
        self.assertIsNone(row.reference)
        self.assertIsNone(max_relative_error(row))

    def test_render_table(self):
        row = MomentRow(name="v/v0", alphas=[[0], [1]], values=[1.0, 0.39662], reference=[1.0, 0.4],
                        relative_errors=[0.0, 0.02])
        report = RunReport(gamma=1.0, order=9, tolerances={}, rho_d=0.52, rows=[row])
        text = render_table(report, "ex1  p=0.5")
        self.assertIn("ex1  p=0.5", text)
        self.assertIn("rho_9 = 0.5200", text)
        self.assertIn("0.39662", text)
        self.assertIn("2.00%", text)


class TestPipeline(unittest.TestCase):

    def test_trivial_decomposition(self):
        lam = exact_moments(UniformInterval(a=0.0, b=1.0), 6)
        solution, report = decompose_and_report(DecomposeRequest(mu=lam, lam=lam, gamma=1.0, order=3,
                                                                 options=OPTIONS, atoms=True))
        self.assertAlmostEqual(report.rho_d, 1.0, delta=1e-6)
        self.assertIn("no singular part detected", report.notes)
        self.assertIsNone(report.atoms)
        self.assertEqual([row.name for row in report.rows], ["y/y0", "v"])
        self.assertTrue(report.conditioned)
        self.assertTrue(report.certificate.passed, report.certificate)
        self.assertEqual(report.solver["status"], "optimal")
        self.assertLessEqual(report.diagnostics["feasibility_residual"], 1e-12)

    def test_report_file(self):
        lam = exact_moments(UniformInterval(a=0.0, b=1.0), 4)
        _, report = decompose_and_report(DecomposeRequest(mu=lam, lam=lam, gamma=0.5, order=2, options=OPTIONS))
        with tempfile.TemporaryDirectory() as folder:
            path = Path(folder) / "report.json"
            write_report(report, path)
            data = json.loads(path.read_text())
        self.assertEqual(data["order"], 2)
        self.assertAlmostEqual(data["rho_d"], 0.5, delta=1e-6)
        self.assertEqual(data["rows"][1]["name"], "v/v0")


class TestExamples(unittest.TestCase):

    def test_known_examples(self):
        self.assertEqual(sorted(examples.EXAMPLES), ["ex1", "ex2", "ex3", "ex4", "ex5"])
        with self.assertRaises(UnknownExampleError):
            examples.get_example("ex9")

    def test_request_of_ex1(self):
        request = examples.build_request("ex1", 0.1)
        self.assertEqual(request.order, 9)
        self.assertAlmostEqual(request.gamma, 0.2)
        self.assertEqual(request.mu.max_degree, 18)
        self.assertAlmostEqual(request.mu.mass, 1.0)
        self.assertAlmostEqual(request.mu[(1,)], 0.1 * 0.4 + 0.9 * 0.4)
        self.assertFalse(request.options.condition)
        np.testing.assert_allclose(request.ref_psi.values[:3], [1.0, 0.4, 0.16])

    def test_request_overrides(self):
        request = examples.build_request("ex5", 0.1, order=3, nu_kind="box", atoms=True)
        self.assertEqual(request.order, 3)
        self.assertTrue(request.atoms)
        self.assertTrue(request.circle_residual)
        self.assertAlmostEqual(request.lam[(2, 0)], 1.0 / 3.0)
        ex3 = examples.build_request("ex3", 0.5, order=2)
        self.assertAlmostEqual(ex3.lam.mass, 2.0)
        self.assertAlmostEqual(ex3.gamma, 1.0)

    def test_reproduce_small_order(self):
        report = examples.reproduce("ex1", 0.5, order=3, options=OPTIONS)
        self.assertEqual(report.order, 3)
        self.assertEqual([row.name for row in report.rows], ["y/y0", "v/v0"])
        self.assertIsNotNone(report.rows[1].relative_errors)
        self.assertGreater(report.rho_d, 0.5 - 1e-6)


if __name__ == '__main__':
    unittest.main()
