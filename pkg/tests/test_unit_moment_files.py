import json
import tempfile
import unittest
from pathlib import Path

import numpy as np

from src.exceptions import MomentFileError
from src.moments.measures import exact_moments
from src.moments.models import MomentSequence
from src.schemas import GaussianProduct, UniformInterval
from src.services.moment_files import dumps, loads, read_moment_file, write_moment_file


class TestMomentFiles(unittest.TestCase):

    def setUp(self):
        self.z = exact_moments(GaussianProduct(n=2), 4).relabel("gaussian2")

    def document(self):
        return json.loads(dumps(self.z))

    def test_canonical_text(self):
        with tempfile.TemporaryDirectory() as folder:
            path = Path(folder) / "z.json"
            write_moment_file(self.z, path)
            again = read_moment_file(path)
            np.testing.assert_array_equal(again.values, self.z.values)
            self.assertEqual(again.label, "gaussian2")
            self.assertEqual(dumps(again), path.read_text(encoding="utf-8"))

    def test_entries_in_graded_order(self):
        alphas = [entry["alpha"] for entry in self.document()["entries"]]
        self.assertEqual(alphas[:6], [[0, 0], [1, 0], [0, 1], [2, 0], [1, 1], [0, 2]])
        self.assertEqual(len(alphas), 15)

    def test_full_precision(self):
        z = exact_moments(UniformInterval(a=0.0, b=0.3), 3)
        np.testing.assert_array_equal(loads(dumps(z)).values, z.values)

    def test_negative_zero(self):
        z = MomentSequence(1, 1, [1.0, -0.0])
        self.assertIn('"value": 0}', dumps(z))

    def test_order_of_entries_is_free(self):
        document = self.document()
        document["entries"].reverse()
        np.testing.assert_array_equal(loads(json.dumps(document)).values, self.z.values)

    def test_missing_entry(self):
        document = self.document()
        document["entries"].pop()
        with self.assertRaises(MomentFileError):
            loads(json.dumps(document))

    def test_duplicate_entry(self):
        document = self.document()
        document["entries"].append(document["entries"][3])
        with self.assertRaisesRegex(MomentFileError, "twice"):
            loads(json.dumps(document))

    def test_wrong_dimension(self):
        document = self.document()
        document["entries"][2]["alpha"] = [0, 1, 0]
        with self.assertRaises(MomentFileError):
            loads(json.dumps(document))

    def test_degree_above_declared(self):
        document = self.document()
        document["entries"][-1]["alpha"] = [0, 5]
        with self.assertRaisesRegex(MomentFileError, "exceeds"):
            loads(json.dumps(document))

    def test_schema_errors(self):
        with self.assertRaises(MomentFileError):
            loads("{not json")
        document = self.document()
        document["dimension"] = 0
        with self.assertRaises(MomentFileError):
            loads(json.dumps(document))
        document = self.document()
        document["entries"][1]["value"] = float("nan")
        with self.assertRaises(MomentFileError):
            loads(json.dumps(document))

    def test_unreadable_file(self):
        with self.assertRaises(MomentFileError):
            read_moment_file("/nonexistent/moments.json")


if __name__ == '__main__':
    unittest.main()
