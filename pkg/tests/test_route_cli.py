import json
from unittest.mock import MagicMock

import pytest

from main import main
from src.schemas import RunReport
from src.services import moment_files


def test_gen_moments_file(tmp_path, capsys):
    out = tmp_path / "nu.json"
    code = main(["gen-moments", "--spec", "uniform:0.1:0.7", "--degree", "4", "--out", str(out)])
    assert code == 0
    z = moment_files.read_moment_file(out)
    assert z.max_degree == 4
    assert z.values.tolist() == pytest.approx([1.0, 0.4, 0.19, 0.1, 0.05602])
    assert z.label == "uniform[0.1,0.7]"


def test_gen_moments_file_is_canonical(tmp_path):
    out = tmp_path / "mix.json"
    assert main(["gen-moments", "--spec", "mix:0.3=gaussian2,0.7=circle", "--degree", "6", "--out", str(out)]) == 0
    text = out.read_text(encoding="utf-8")
    assert moment_files.dumps(moment_files.read_moment_file(out)) == text


def test_gen_moments_stdout(capsys):
    code = main(["gen-moments", "--spec", "circle", "--degree", "2", "--label", "psi"])
    assert code == 0
    data = json.loads(capsys.readouterr().out)
    assert data["dimension"] == 2
    assert data["label"] == "psi"
    assert len(data["entries"]) == 6


def test_bad_spec(capsys):
    code = main(["gen-moments", "--spec", "uniform:1", "--degree", "2"])
    assert code == 2
    error = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert error["error"] == "SpecParseError"
    assert "position" in error["detail"]


def test_decompose_json(uniform_pair, capsys):
    code = main(["decompose", "--mu", uniform_pair["mu"], "--lambda", uniform_pair["lambda"], "--gamma", "1",
                 "--order", "2", "--condition", "--json"])
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert report["rho_d"] == pytest.approx(1.0, abs=1e-5)
    assert report["conditioned"] is True
    assert "no singular part detected" in report["notes"]


def test_decompose_outputs(write_moments, tmp_path, capsys):
    mu = write_moments("mix:0.5=uniform:0.1:0.7,0.5=dirac:0.4", 6, "mu.json")
    lam = write_moments("uniform:0:1", 6, "lambda.json")
    out = tmp_path / "report.json"
    program = tmp_path / "program.json"
    code = main(["decompose", "--mu", mu, "--lambda", lam, "--gamma", "1", "--order", "3",
                 "--ref-psi", "dirac:0.4", "--ref-nu", lam, "--out", str(out), "--dump-program", str(program)])
    assert code == 0
    text = capsys.readouterr().out
    assert "rho_3 =" in text
    assert "rel.err" in text
    report = json.loads(out.read_text())
    assert report["rows"][1]["reference"][:3] == pytest.approx([1.0, 0.4, 0.16])
    assert report["rows"][0]["reference"][:2] == pytest.approx([1.0, 0.5])
    layout = json.loads(program.read_text())
    assert layout["num_vars"] == 7
    assert [block["name"] for block in layout["blocks"]] == ["moment", "mu", "lambda"]


def test_decompose_hierarchy(write_moments, capsys):
    mu = write_moments("dirac:0.4", 6, "mu.json")
    lam = write_moments("uniform:0:1", 6, "lambda.json")
    code = main(["decompose", "--mu", mu, "--lambda", lam, "--gamma", "1", "--order", "3", "--hierarchy", "1,2,3"])
    assert code == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].split() == ["d", "rho_d", "status"]
    assert len(lines) == 5
    assert lines[-1] == "monotone: yes"


def test_decompose_missing_file(tmp_path, capsys):
    lam = tmp_path / "missing.json"
    code = main(["decompose", "--mu", str(lam), "--lambda", str(lam), "--gamma", "1", "--order", "2"])
    assert code == 2
    error = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert error == {"error": "MomentFileError", "detail": error["detail"], "exit_code": 2}


def test_decompose_nonpositive_gamma(uniform_pair, capsys):
    code = main(["decompose", "--mu", uniform_pair["mu"], "--lambda", uniform_pair["lambda"], "--gamma", "0",
                 "--order", "2"])
    assert code == 2
    error = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert error["error"] == "InvalidProblemError"
    assert "gamma" in error["detail"]


def test_decompose_dimension_mismatch(write_moments, capsys):
    mu = write_moments("gaussian2", 4, "mu.json")
    lam = write_moments("uniform:0:1", 4, "lambda.json")
    code = main(["decompose", "--mu", mu, "--lambda", lam, "--gamma", "1", "--order", "2"])
    assert code == 3
    assert "DimensionMismatchError" in capsys.readouterr().err


def test_check_density_bound(write_moments, capsys):
    nu = write_moments("scale:0.5=uniform:0.1:0.7", 4, "nu.json")
    lam = write_moments("uniform:0:1", 4, "lambda.json")
    assert main(["check-density-bound", "--nu", nu, "--lambda", lam, "--gamma", "1", "--order", "2"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 3
    assert all(" holds " in line for line in lines)
    assert main(["check-density-bound", "--nu", nu, "--lambda", lam, "--gamma", "0.4", "--order", "0"]) == 0
    assert "fails" in capsys.readouterr().out


def test_reproduce_runs_every_weight(monkeypatch, tmp_path, capsys):
    report = RunReport(gamma=0.2, order=9, tolerances={}, rho_d=0.1)
    mock_reproduce = MagicMock(return_value=report)
    monkeypatch.setattr("src.routes.reproduce.examples.reproduce", mock_reproduce)
    out = tmp_path / "ex1.json"
    code = main(["reproduce", "--example", "ex1", "--p", "0.1,0.5", "--out", str(out)])
    assert code == 0
    assert mock_reproduce.call_count == 2
    name, p, order, nu_kind, options = mock_reproduce.call_args_list[1].args
    assert (name, p, order, nu_kind) == ("ex1", 0.5, None, "gaussian")
    assert options.condition is False
    assert (tmp_path / "ex1_p0.1.json").exists()
    assert (tmp_path / "ex1_p0.5.json").exists()
    assert "ex1  p=0.1" in capsys.readouterr().out


def test_reproduce_condition_switch(monkeypatch, tmp_path):
    mock_reproduce = MagicMock(return_value=RunReport(gamma=0.2, order=9, tolerances={}, rho_d=0.1))
    monkeypatch.setattr("src.routes.reproduce.examples.reproduce", mock_reproduce)
    out = str(tmp_path / "ex3.json")
    assert main(["reproduce", "--example", "ex3", "--p", "0.5", "--condition", "--out", out]) == 0
    assert mock_reproduce.call_args.args[-1].condition is True


def test_reproduce_unknown_example(capsys):
    assert main(["reproduce", "--example", "ex7", "--p", "0.5"]) == 2
    assert "UnknownExampleError" in capsys.readouterr().err


def test_reproduce_invalid_weight(monkeypatch, capsys):
    assert main(["reproduce", "--example", "ex1", "--p", "1.5", "--order", "2"]) == 2
    assert "ValidationError" in capsys.readouterr().err


def test_missing_arguments():
    with pytest.raises(SystemExit) as exc:
        main(["decompose", "--mu", "a.json"])
    assert exc.value.code == 2


def test_reproduce_hierarchy(capsys):
    code = main(["reproduce", "--example", "ex1", "--p", "0.5", "--hierarchy", "1,2", "--eps-gap", "1e-8"])
    assert code == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "ex1  p=0.5  gamma=1"
    assert [line.split()[0] for line in lines[2:4]] == ["1", "2"]
    assert lines[-1] == "monotone: yes"


def test_bad_hierarchy_orders():
    with pytest.raises(SystemExit) as exc:
        main(["reproduce", "--example", "ex1", "--p", "0.5", "--hierarchy", "1,x"])
    assert exc.value.code == 2
