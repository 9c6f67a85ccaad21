import csv
import json

import pytest

from gafzeros.cli import main
from gafzeros.model import CoefficientVector
from gafzeros.zeros import ZeroSet


def test_sample_then_zeros(tmp_path):
    assert main(["sample", "--rho", "1.5", "--r-max", "0.8", "--count", "2", "--seed", "4", "--out", str(tmp_path / "s")]) == 0
    cv = CoefficientVector.from_json((tmp_path / "s" / "realization_1.json").read_text())
    assert cv.spec.rho == 1.5
    assert main(["zeros", "--input", str(tmp_path / "s" / "realization_1.json"), "--radius", "0.8",
                 "--out", str(tmp_path / "z")]) == 0
    zs = ZeroSet.from_json((tmp_path / "z" / "zeros.json").read_text())
    rows = list(csv.DictReader((tmp_path / "z" / "zeros.csv").open()))
    assert len(rows) == zs.count


def test_sample_is_seeded(tmp_path):
    for d in ("a", "b"):
        main(["sample", "--seed", "8", "--out", str(tmp_path / d)])
    assert (tmp_path / "a" / "realization_0.json").read_text() == (tmp_path / "b" / "realization_0.json").read_text()


def test_conditioned_sample(tmp_path):
    assert main(["sample", "--conditioned", "--out", str(tmp_path)]) == 0
    cv = CoefficientVector.from_json((tmp_path / "realization_0.json").read_text())
    assert cv.coeffs[0] == 0


def test_intensity_reports_both_routes(tmp_path, capsys):
    assert main(["intensity", "--points", "0.1+0.2j, 0.3, -0.4j", "--out", str(tmp_path)]) == 0
    d = json.loads((tmp_path / "intensity.json").read_text())
    assert d["relative_difference"] < 1e-10
    assert d["det_route"] > 0 and d["perm_route"] > 0


def test_intensity_general_rho_from_config(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"schema_version": 1, "points": [[0.1, 0.0], [0.0, 0.3]], "rho": 2.0}))
    assert main(["intensity", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    d = json.loads((tmp_path / "intensity.json").read_text())
    assert d["rho"] == 2.0 and d["det_route"] is None


def test_law_tables(tmp_path):
    assert main(["law", "--radii", "0.5", "0.7", "--out", str(tmp_path)]) == 0
    rows = list(csv.DictReader((tmp_path / "moments.csv").open()))
    assert float(rows[0]["mean"]) == pytest.approx(1 / 3)
    pmf = [r for r in csv.DictReader((tmp_path / "count_pmf.csv").open()) if r["r"] == "0.5"]
    assert float(pmf[0]["probability"]) == pytest.approx(0.6885375371203397)
    assert (tmp_path / "binomial_moments.csv").exists()


def test_reconstruct_convergence_csv(tmp_path):
    assert main(["reconstruct", "--radius", "0.9", "--seed", "5", "--out", str(tmp_path)]) == 0
    rows = list(csv.DictReader((tmp_path / "convergence.csv").open()))
    assert [int(r["terms"]) for r in rows] == list(range(1, len(rows) + 1))


def test_dynamics_outputs(tmp_path):
    assert main(["dynamics", "--horizon", "0.01", "--dt", "0.001", "--region", "0.8", "--seed", "2",
                 "--out", str(tmp_path)]) == 0
    trajs = json.loads((tmp_path / "trajectories.json").read_text())
    assert isinstance(trajs, list)
    assert (tmp_path / "frames.csv").exists()
    assert main(["dynamics", "--estimate-sde", "--ensemble", "500", "--out", str(tmp_path)]) == 0
    assert "slope" in json.loads((tmp_path / "sde.json").read_text())


def test_verify_exit_codes(tmp_path):
    assert main(["verify", "--experiment", "euler-identity", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "euler-identity" / "report.json").exists()
    cfg = tmp_path / "strict.json"
    # an impossible tolerance must make verify fail with exit code 1
    cfg.write_text(json.dumps({"schema_version": 1, "experiment_id": "euler-identity",
                               "tolerances": {"relative_error": 1e-300}}))
    assert main(["verify", "--config", str(cfg), "--out", str(tmp_path / "strict")]) == 1


def test_verify_bad_input(tmp_path, capsys):
    assert main(["verify", "--experiment", "nope", "--out", str(tmp_path / "x")]) == 2
    assert "known ids" in capsys.readouterr().err
    assert not (tmp_path / "x").exists()
    bad = tmp_path / "bad.json"
    bad.write_text('{"experiment_id": "clt"}')
    assert main(["verify", "--config", str(bad), "--out", str(tmp_path / "y")]) == 2
    assert main(["law", "--config", str(bad)]) == 2


def test_verify_list(capsys):
    assert main(["verify", "--list"]) == 0
    assert "two-point-law" in capsys.readouterr().out
