"""Command line contract: exit codes, deterministic reports, CSV projections."""

import json

import numpy as np
import pytest

from hermicone.cli import main
from hermicone.metric import HermitianMetric


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv)
    assert code == 0, err
    return json.loads(out)


def write_metric(tmp_path, h, name="metric.json"):
    path = tmp_path / name
    path.write_text(json.dumps(HermitianMetric(np.asarray(h, dtype=complex)).to_json_obj()))
    return str(path)


def test_catalog_listing(capsys):
    doc = run_json(capsys, "catalog")
    names = {entry["name"] for entry in doc["catalog"]}
    assert names == {"torus2", "torus3", "kodaira_thurston", "iwasawa"}
    iw = next(e for e in doc["catalog"] if e["name"] == "iwasawa")
    assert iw["n"] == 3 and iw["structure_terms"] == 1


def test_verify_passes_on_catalog_model(capsys):
    doc = run_json(capsys, "verify", "--catalog", "kodaira_thurston", "--metrics", "2")
    assert doc["subcommand"] == "verify"
    assert doc["report"]["pass"] is True
    assert doc["report"]["validation"]["integrable"] is True
    assert doc["report"]["metrics_checked"] == 3
    assert max(doc["report"]["identity_residuals"].values()) <= 1e-10
    assert len(doc["model_hash"]) == 64


def test_eval_frozen_value_and_predicates(capsys):
    doc = run_json(capsys, "eval", "--catalog", "kodaira_thurston",
                   "--functional", "F")
    assert doc["report"]["value"] == pytest.approx(0.25, abs=1e-12)
    assert doc["report"]["predicates"]["is_kahler"] is False
    assert doc["report"]["predicates"]["is_skt"] is True


def test_eval_reads_metric_file(tmp_path, capsys):
    path = write_metric(tmp_path, [[2.0, 0.0], [0.0, 2.0]])
    doc = run_json(capsys, "eval", "--catalog", "kodaira_thurston",
                   "--functional", "F", "--metric", path)
    # F is homogeneous of degree n = 2
    assert doc["report"]["value"] == pytest.approx(1.0, abs=1e-11)


def test_torsion_payload(capsys):
    doc = run_json(capsys, "torsion", "--catalog", "iwasawa")
    rep = doc["report"]["torsion"]
    assert set(rep) == {"gamma"}  # rho is gated off this model
    assert rep["gamma"]["norm_sq"] == pytest.approx(1.0, abs=1e-12)
    assert rep["gamma"]["residual_equation"] <= 1e-9
    assert rep["gamma"]["torsion"], "serialized torsion form should be nonempty"


def test_reports_are_byte_identical(capsys):
    _, first, _ = run(capsys, "eval", "--catalog", "iwasawa", "--functional", "G")
    _, second, _ = run(capsys, "eval", "--catalog", "iwasawa", "--functional", "G")
    assert first == second


def test_varcheck_json_and_determinism_across_threads(capsys, monkeypatch):
    args = ("varcheck", "--catalog", "torus2", "--tuples", "3")
    monkeypatch.setenv("HERMICONE_THREADS", "1")
    code, serial, _ = run(capsys, *args)
    assert code == 0
    monkeypatch.setenv("HERMICONE_THREADS", "4")
    code, threaded, _ = run(capsys, *args)
    assert code == 0
    assert serial == threaded
    doc = json.loads(serial)
    assert doc["report"]["pass"] is True
    assert doc["report"]["failures"] == 0
    assert max(doc["report"]["worst_rel_err"].values()) <= 1e-5


def test_varcheck_csv_projection(capsys):
    code, out, _ = run(capsys, "varcheck", "--catalog", "torus2",
                       "--tuples", "2", "--format", "csv")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "name,detail,analytic,fd,abs_err,rel_err"
    assert len(lines) > 2
    assert all(line.count(",") >= 5 for line in lines[1:])


def test_descend_json_trace(capsys):
    doc = run_json(capsys, "descend", "--catalog", "kodaira_thurston",
                   "--functional", "F", "--steps", "3", "--normalize", "off")
    rep = doc["report"]
    assert rep["functional"] == "F"
    assert rep["monotone"] is True
    assert rep["initial_value"] == pytest.approx(0.25, abs=1e-12)
    assert len(rep["iterations"]) >= 2
    assert rep["iterations"][0]["value"] >= rep["iterations"][-1]["value"]


def test_descend_csv_trace(capsys):
    code, out, _ = run(capsys, "descend", "--catalog", "kodaira_thurston",
                       "--functional", "F", "--steps", "2", "--normalize", "off",
                       "--format", "csv")
    assert code == 0
    header = out.splitlines()[0].split(",")
    assert header[:4] == ["index", "value", "gradient_norm", "step_size"]
    assert "c0" in header and "c3" in header


def test_out_flag_writes_file(tmp_path, capsys):
    target = tmp_path / "report.json"
    code, out, _ = run(capsys, "eval", "--catalog", "torus2",
                       "--functional", "F", "--out", str(target))
    assert code == 0 and out == ""
    doc = json.loads(target.read_text())
    assert doc["report"]["value"] == 0.0


def test_exit_code_schema_errors(tmp_path, capsys):
    code, _, err = run(capsys, "eval", "--functional", "F")
    assert code == 2 and "exactly one" in err
    code, _, _ = run(capsys, "eval", "--catalog", "torus2", "--model", "x.json",
                     "--functional", "F")
    assert code == 2
    code, _, _ = run(capsys, "eval", "--catalog", "torus2", "--functional", "F",
                     "--metric", str(tmp_path / "missing.json"))
    assert code == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code, _, _ = run(capsys, "eval", "--model", str(bad), "--functional", "F")
    assert code == 2
    code, _, err = run(capsys, "eval", "--catalog", "torus2", "--functional", "F",
                       "--format", "csv")
    assert code == 2 and "CSV" in err


def test_exit_code_validation_errors(tmp_path, capsys):
    code, _, _ = run(capsys, "verify", "--catalog", "nope")
    assert code == 3
    # integrable but not unimodular: d(theta^1) = theta^1 ^ thetabar^1
    doc = {"name": "halfdensity", "n": 2,
           "terms": [{"i": 1, "kind": "mixed", "j": 1, "k": 1,
                      "re": 1.0, "im": 0.0}]}
    path = tmp_path / "hd.json"
    path.write_text(json.dumps(doc))
    code, _, err = run(capsys, "verify", "--model", str(path))
    assert code == 3 and "does not vanish" in err
    # metric dimension mismatch is a validation failure too
    metric = write_metric(tmp_path, np.eye(3))
    code, _, _ = run(capsys, "eval", "--catalog", "torus2", "--functional", "F",
                     "--metric", metric)
    assert code == 3


def test_exit_code_predicate_errors(capsys):
    code, _, _ = run(capsys, "eval", "--catalog", "iwasawa", "--functional", "F")
    assert code == 4
    code, _, _ = run(capsys, "torsion", "--catalog", "kodaira_thurston",
                     "--which", "gamma")
    assert code == 4
    code, _, _ = run(capsys, "eval", "--catalog", "kodaira_thurston",
                     "--functional", "G")
    assert code == 4


def test_exit_code_infeasible(capsys):
    code, _, err = run(capsys, "descend", "--catalog", "iwasawa",
                       "--functional", "F", "--steps", "1")
    assert code == 6
    assert "positive" in err


def test_descend_random_start_seeded(capsys):
    a = run_json(capsys, "descend", "--catalog", "torus2", "--functional", "F",
                 "--metric", "random", "--seed", "3", "--steps", "1",
                 "--normalize", "off")
    b = run_json(capsys, "descend", "--catalog", "torus2", "--functional", "F",
                 "--metric", "random", "--seed", "3", "--steps", "1",
                 "--normalize", "off")
    assert a == b
    assert a["report"]["termination"] == "GradientSmall"
    assert a["report"]["final_value"] == 0.0
