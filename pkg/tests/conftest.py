import pytest

from src.moments.measures import exact_moments
from src.schemas import DecomposeOptions, SolverSettings
from src.services import moment_files
from src.services.spec_parser import parse_spec


@pytest.fixture()
def write_moments(tmp_path):
    # writes the moments of a spec string up to a degree and returns the file path

    def _write(spec: str, degree: int, name: str) -> str:
        path = tmp_path / name
        moment_files.write_moment_file(exact_moments(parse_spec(spec), degree), path)
        return str(path)

    return _write


@pytest.fixture()
def uniform_pair(write_moments):
    return {"mu": write_moments("uniform:0:1", 8, "mu.json"), "lambda": write_moments("uniform:0:1", 8, "lambda.json")}


@pytest.fixture(scope="module")
def tight_options():
    return DecomposeOptions(solver=SolverSettings(eps_gap=1e-9, eps_feas=1e-9, max_iters=150), condition=True)
