import json

import pytest

from mmot.cli import main
from mmot.serialize import read_json, validate


def _run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_gen_presets(tmp_path, capsys):
    code, out, _ = _run(["gen", "--preset", "counterexample", "--d", "1", "--n", "4", "--out", str(tmp_path)], capsys)
    assert code == 0
    doc = read_json(tmp_path / "counterexample_d1_n4.json")
    validate(doc, "measure")
    assert len(doc["weights"]) == 20

    code, out, _ = _run(["gen", "--preset", "counterexample-parts", "--n", "1", "--out", str(tmp_path)], capsys)
    assert code == 0 and len(out.split()) == 3

    code, _, _ = _run(["gen", "--preset", "uniform-box", "--d", "2", "--n", "3", "--box", "0,1x0,1", "--out", str(tmp_path)], capsys)
    assert code == 0
    assert len(read_json(tmp_path / "uniform_box_d2_n3.json")["points"]) == 9


def test_gen_errors(tmp_path, capsys):
    assert _run(["gen", "--preset", "counterexample", "--out", str(tmp_path / "missing")], capsys)[0] == 2
    assert _run(["gen", "--preset", "counterexample", "--n", "0", "--out", str(tmp_path)], capsys)[0] == 1
    assert _run(["gen", "--preset", "nonsense"], capsys)[0] == 1
    assert _run(["gen", "--preset", "uniform-box", "--d", "2", "--box", "0,1", "--out", str(tmp_path)], capsys)[0] == 1


def test_construct_gamma0(capsys):
    code, out, _ = _run(["construct", "gamma0", "--d", "1", "--n", "2"], capsys)
    doc = json.loads(out)
    assert code == 0
    validate(doc["plan"], "plan")
    validate(doc["certificate"], "certificate")
    assert len(doc["plan"]["atoms"]) == 4
    assert doc["certificate"]["gap"] == 0.0 and doc["certificate"]["verdict"] == "certified_optimal"


def test_construct_fractal_and_fat(tmp_path, capsys):
    code, out, _ = _run(["construct", "fractal", "--N", "3", "--K", "8", "--samples", "81", "--out", str(tmp_path / "fr.json")], capsys)
    diag = json.loads(out)["diagnostics"]
    assert code == 0 and diag["max_deviation"] <= 3 * 3.0**-8
    validate(read_json(tmp_path / "fr.json"), "plan")
    validate(read_json(tmp_path / "fr.certificate.json"), "certificate")

    code, out, _ = _run(["construct", "fat", "--m", "20", "--format", "csv", "--out", str(tmp_path / "fat.csv")], capsys)
    assert code == 0 and max(json.loads(out)["diagnostics"]["marginal_l1"]) < 0.05
    lines = (tmp_path / "fat.csv").read_text().splitlines()
    assert lines[0] == "i1,i2,i3,x1,x2,x3,mass" and len(lines) == 1 + 6 * 20**2


def test_construct_from_measure_files(tmp_path, capsys):
    _run(["gen", "--preset", "uniform-box", "--box=-1,1", "--n", "4", "--out", str(tmp_path)], capsys)
    f = str(tmp_path / "uniform_box_d1_n4.json")
    code, out, _ = _run(["construct", "reflection", "--measures", f, "--N", "4"], capsys)
    assert code == 0 and json.loads(out)["certificate"]["verdict"] == "certified_optimal"
    code, out, _ = _run(["construct", "anti-monotone", "--measures", f, f], capsys)
    assert code == 0 and json.loads(out)["certificate"]["max_deviation"] == 0.0
    assert _run(["construct", "reflection", "--N", "3", "--measures", f], capsys)[0] == 1


def test_solve_and_certify(tmp_path, capsys):
    _run(["gen", "--preset", "counterexample-parts", "--n", "1", "--out", str(tmp_path)], capsys)
    files = [str(tmp_path / f"mu_{b}_d1_n1.json") for b in "CRL"]
    code, _, _ = _run(["solve", "--measures", *files, "--out", str(tmp_path / "lp.json")], capsys)
    rep = read_json(tmp_path / "lp.json")
    validate(rep, "solve_report")
    assert code == 0 and rep["value"] == pytest.approx(-298.125, abs=1e-9)

    write_plan = tmp_path / "plan.json"
    write_plan.write_text(json.dumps(rep["plan"]))
    code, out, _ = _run(["certify", "--plan", str(write_plan)], capsys)
    assert code == 0 and json.loads(out)["verdict"] == "certified_optimal"

    code, out, _ = _run(["solve", "--measures", *files, "--method", "sinkhorn", "--epsilon", "0.1"], capsys)
    assert code == 0 and json.loads(out)["residuals"]["marginal_violation"] < 1e-8

    code, out, _ = _run(["solve", "--measures", *files, "--format", "csv"], capsys)
    assert code == 0 and out.splitlines()[0] == "i1,i2,i3,x1,x2,x3,mass"


def test_solve_monge_and_errors(tmp_path, capsys):
    (tmp_path / "two.json").write_text(json.dumps({"d": 1, "points": [[0.0], [1.0]], "weights": [0.5, 0.5]}))
    code, out, _ = _run(["solve", "--measures", str(tmp_path / "two.json"), "--N", "2", "--method", "monge"], capsys)
    assert code == 0 and json.loads(out)["value"] == -1.0

    code, _, err = _run(["solve", "--measures", str(tmp_path / "two.json"), "--N", "2", "--method", "sinkhorn", "--epsilon", "0.001", "--max-iter", "1"], capsys)
    assert code == 1 and "warning" in err

    (tmp_path / "bad.json").write_text("{not json")
    assert _run(["solve", "--measures", str(tmp_path / "bad.json")], capsys)[0] == 2
    (tmp_path / "skew.json").write_text(json.dumps({"d": 1, "points": [[0.0]], "weights": [0.9]}))
    assert _run(["solve", "--measures", str(tmp_path / "skew.json"), "--N", "2"], capsys)[0] == 1
    assert _run(["certify", "--plan", str(tmp_path / "nope.json")], capsys)[0] == 2


def test_reproduce_report(tmp_path, capsys):
    code, _, _ = _run(["reproduce", "--d", "1", "--n-list", "1,2", "--out", str(tmp_path / "r.json")], capsys)
    rep = read_json(tmp_path / "r.json")
    validate(rep, "experiment_report")
    assert code == 0 and rep["ok"]
    first = rep["results"][0]
    assert first["parts_lp_value"] == pytest.approx(-298.125, abs=1e-9)
    assert first["multiplicity_at_C"] == [4] and first["support_match"]


def test_gap_rejects_bad_m(capsys):
    assert _run(["gap", "--m-list", "7"], capsys)[0] == 1
    assert _run(["gap", "--d", "2"], capsys)[0] == 1


def test_gap_is_deterministic(tmp_path, capsys):
    outs = []
    for name in ("a.json", "b.json"):
        _run(["gap", "--m-list", "12", "--mode", "local", "--seed", "0", "--out", str(tmp_path / name)], capsys)
        doc = read_json(tmp_path / name)
        validate(doc, "experiment_report")
        doc.pop("timing")
        outs.append(json.dumps(doc, sort_keys=True))
    assert outs[0] == outs[1]
    res = json.loads(outs[0])["results"][0]
    assert res["monge_value"] >= res["lp_value"] - 1e-9
