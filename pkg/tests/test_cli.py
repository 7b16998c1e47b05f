import json

import pytest

from freeconv.cli import dumps, fmt_number, load_matrices, parse_slot_word, run
from freeconv.measures import SpectralMeasure


def call(capsys, *argv):
    code = run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_weingarten(capsys):
    code, out, _ = call(capsys, "weingarten", "--n", "2")
    assert code == 0
    assert json.loads(out) == {"[1,1]": "1/(N^2 - 1)", "[2]": "-1/(N^3 - N)"}
    code, out, _ = call(capsys, "weingarten", "--n", "3", "--at", "4")
    assert json.loads(out) == {"[1,1,1]": "7/360", "[2,1]": "-1/180", "[3]": "1/360"}


def test_outliers(capsys):
    code, out, _ = call(capsys, "outliers", "--theta", "2", "--mu1", "dirac:0", "--mu2", "semicircle")
    assert code == 0
    assert json.loads(out) == [{"rho": 2.5, "overlap": 0.75}]
    code, out, _ = call(capsys, "outliers", "--theta", "-2", "--mu1", "dirac:0", "--mu2", "semicircle")
    assert json.loads(out) == [{"rho": -2.5, "overlap": 0.75}]
    code, out, _ = call(capsys, "outliers", "--theta", "0.5", "--mu1", "dirac:0", "--mu2", "semicircle")
    assert json.loads(out) == []


def test_convolve_monotone_and_round_trip(capsys, tmp_path):
    path = tmp_path / "m.json"
    code, _, _ = call(capsys, "convolve", "--kind", "monotone", "--mu1", "dirac:2", "--mu2", "semicircle",
                      "--grid", "-3:4:401", "--out", str(path))
    assert code == 0
    text = path.read_text()
    data = json.loads(text)
    (loc, mass), = data["atoms"]
    assert loc == pytest.approx(2.5, abs=1e-6) and mass == pytest.approx(0.75, abs=1e-6)
    assert set(data["density"]) == {"min", "max", "values"}
    # a no-op pass re-emits identical bytes
    assert SpectralMeasure.from_json(text).to_json() + "\n" == text
    # and the file is readable as an input measure
    code, out, _ = call(capsys, "convolve", "--kind", "free", "--mu1", str(path), "--mu2", "dirac:0",
                        "--grid", "-3:4:201")
    assert code == 0 and json.loads(out)["atoms"][0][0] == pytest.approx(2.5, abs=1e-3)


def test_convolve_cfree(capsys):
    code, out, _ = call(capsys, "convolve", "--kind", "cfree", "--mu1", "dirac:0", "--mu2", "semicircle",
                        "--nu1", "dirac:2", "--grid", "-3:4:1401")
    assert code == 0
    (loc, mass), = json.loads(out)["atoms"]
    assert loc == pytest.approx(2.5, abs=1e-6) and mass == pytest.approx(0.75, abs=1e-6)


def test_cumulants(capsys, tmp_path):
    path = tmp_path / "mats.json"
    path.write_text(json.dumps({"matrices": [[[1, 0], [0, 0]]]}))
    code, out, _ = call(capsys, "cumulants", "--matrices", str(path), "--word", "1,1")
    assert code == 0
    assert json.loads(out) == {"(1)(2)": "1/6", "(1 2)": "1/3"}
    code, out, _ = call(capsys, "cumulants", "--matrices", str(path), "--word", "1,1", "--gmax", "1")
    data = json.loads(out)
    assert data["order-0"] == {"(1)(2)": "1/4", "(1 2)": "1/4"}
    assert data["order-2"] == {"(1)(2)": "-1/4", "(1 2)": "1/4"}
    code, out, err = call(capsys, "cumulants", "--matrices", str(path), "--word", "1,1,1")
    assert code == 0 and "not unique" in err


def test_cumulants_complex_entries(tmp_path, capsys):
    path = tmp_path / "c.json"
    path.write_text(json.dumps([[[[1, 0], [0, 1]], [[0, -1], [2, 0]]], [["1/2", 0], [0, 1]]]))
    code, out, _ = call(capsys, "cumulants", "--matrices", str(path))
    assert code == 0 and len(json.loads(out)) == 2


@pytest.mark.parametrize("argv,code", [
    (["--bogus", "weingarten", "--n", "2"], 2),
    (["weingarten"], 2),
    (["weingarten", "--n", "2", "--frobnicate", "1"], 2),
    (["convolve", "--kind", "cfree", "--mu1", "dirac:0", "--mu2", "semicircle"], 2),
    (["convolve", "--kind", "sideways", "--mu1", "dirac:0", "--mu2", "semicircle"], 2),
    (["check", "nonsense"], 2),
    (["weingarten", "--n", "2", "--threads", "0"], 2),
    (["weingarten", "--n", "3", "--at", "1"], 1),
    (["outliers", "--theta", "1", "--mu1", "bernoulli", "--mu2", "semicircle"], 1),
    (["outliers", "--theta", "2", "--mu1", "gaussian", "--mu2", "semicircle"], 1),
    (["convolve", "--kind", "free", "--mu1", "missing.json", "--mu2", "semicircle"], 1),
    (["simulate", "scaling", "--config", "does-not-exist.json"], 1),
    (["weingarten", "--n", "2"], 0),
    (["check", "exact"], 0),
])
def test_exit_codes(capsys, argv, code):
    got, out, err = call(capsys, *argv)
    assert got == code
    if code == 1:
        e = json.loads(err.strip().splitlines()[-1])
        assert set(e) == {"error", "message"}
    if code == 2 and argv[0].startswith("--"):
        assert "--bogus" in err


def test_usage_error_names_flag(capsys):
    code, _, err = call(capsys, "weingarten", "--n", "2", "--frobnicate", "1")
    assert code == 2 and "--frobnicate" in err


def test_pole_message(capsys):
    code, _, err = call(capsys, "weingarten", "--n", "3", "--at", "1")
    assert json.loads(err) == {"error": "ZeroDivisionError", "message": "pole at N=1"}


def test_check_analytic(capsys):
    code, out, _ = call(capsys, "check", "analytic")
    rep = json.loads(out)
    assert code == 0 and rep["passed"]
    assert {c["name"] for c in rep["checks"]} >= {"bernoulli_boxplus_bernoulli", "cfree_reductions"}


def test_global_flags_either_side(capsys, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run(["--out", str(a), "weingarten", "--n", "2"]) == 0
    assert run(["weingarten", "--n", "2", "--out", str(b)]) == 0
    assert a.read_text() == b.read_text()


def _scaling_cfg(tmp_path):
    cfg = {"dims": [16, 32, 64], "trials": 40, "seed": 3, "ensemble": "haar-orthogonal", "word": "XYXY",
           "a": "bernoulli"}
    p = tmp_path / "scaling.json"
    p.write_text(json.dumps(cfg))
    return p


def test_simulate_outputs_and_thread_independence(tmp_path, capsys):
    cfg = _scaling_cfg(tmp_path)
    outs = []
    for threads in ("1", "3"):
        out = tmp_path / f"run{threads}.json"
        assert run(["simulate", "scaling", "--config", str(cfg), "--threads", threads, "--out", str(out)]) == 0
        outs.append((out.read_bytes(), out.with_suffix(".csv").read_bytes()))
    assert outs[0] == outs[1]
    summary = json.loads(outs[0][0])
    assert summary["experiment"] == "scaling" and summary["method"] == "monte-carlo"
    lines = outs[0][1].decode().splitlines()
    assert lines[0] == "N,trial,value" and len(lines) == 1 + 3 * 40


def test_simulate_seed_override(tmp_path, capsys):
    cfg = _scaling_cfg(tmp_path)
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    run(["simulate", "scaling", "--config", str(cfg), "--out", str(a)])
    run(["simulate", "scaling", "--config", str(cfg), "--seed", "4", "--out", str(b)])
    assert json.loads(a.read_text())["config"]["seed"] == 3
    assert json.loads(b.read_text())["config"]["seed"] == 4
    assert a.read_text() != b.read_text()


def test_simulate_default_paths(tmp_path, capsys):
    cfg = {"dims": [64], "trials": 2, "seed": 1, "kind": "c-free"}
    p = tmp_path / "res.json"
    p.write_text(json.dumps(cfg))
    code, out, _ = call(capsys, "simulate", "residuals", "--config", str(p))
    assert code == 0 and json.loads(out)["kind"] == "c-free"
    assert (tmp_path / "res.trials.csv").exists()
    cfg["outputs"] = {"csv": str(tmp_path / "x.csv"), "json": str(tmp_path / "x.json")}
    p.write_text(json.dumps(cfg))
    assert run(["simulate", "residuals", "--config", str(p)]) == 0
    assert (tmp_path / "x.csv").exists() and json.loads((tmp_path / "x.json").read_text())["kind"] == "c-free"


def test_simulate_sum_and_outlier_small(tmp_path, capsys):
    p = tmp_path / "s.json"
    p.write_text(json.dumps({"dims": [100], "trials": 2, "seed": 1, "mu1": "bernoulli", "mu2": "semicircle",
                             "v": "eigenspace:1", "kmax": 3}))
    code, out, _ = call(capsys, "simulate", "sum", "--config", str(p))
    data = json.loads(out)
    assert code == 0 and data["cfree_moments"] == pytest.approx([1, 2, 3], abs=1e-3)
    p.write_text(json.dumps({"dims": [100], "trials": 2, "seed": 1, "theta": 2, "mu1": "dirac:0", "mu2": "gue"}))
    code, out, _ = call(capsys, "simulate", "outlier", "--config", str(p))
    data = json.loads(out)
    assert code == 0 and data["predicted"] == [{"rho": 2.5, "overlap": 0.75}]
    header = (tmp_path / "s.trials.csv").read_text().splitlines()[0]
    assert header == "N,trial,top,bottom,n_outside,rho0_observed,rho0_overlap"


def test_formatting_helpers(tmp_path):
    from fractions import Fraction

    assert fmt_number(Fraction(1, 3)) == "1/3"
    assert fmt_number(1 / 3) == 0.333333333333
    assert fmt_number(complex(1, 2)) == [1.0, 2.0]
    assert fmt_number(float("nan")) is None
    assert dumps({"a": [Fraction(1, 2), 2.0]}) == '{"a": ["1/2", 2.0]}'
    assert parse_slot_word("1,1,2", 2) == [0, 0, 1]
    assert parse_slot_word(None, 3) == [0, 1, 2]
    for bad in ("0", "3", "x"):
        with pytest.raises(ValueError):
            parse_slot_word(bad, 2)
    p = tmp_path / "m.json"
    p.write_text(json.dumps([[[1, [0, 1]], [[0, -1], 2]]]))
    (m,), = [load_matrices(str(p))]
    assert m.dtype.kind == "c"
