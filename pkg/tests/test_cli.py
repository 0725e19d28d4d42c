import json
import subprocess
import sys

import numpy as np
import pytest

from conftest import cached_model
from pairdef.cli import main, parse_model_spec
from pairdef.errors import ConfigError
from pairdef.models import model_to_json, save_model


def run(argv, tmp_path, name="out"):
    js = tmp_path / f"{name}.json"
    code = main(argv + ["--json", str(js)])
    doc = json.loads(js.read_text()) if js.exists() else None
    return code, doc


def report(doc, title):
    return next(r for r in doc["reports"] if r["title"].startswith(title))


def test_obstruction_polynomial(tmp_path, capsys):
    code, doc = run(["kuranishi", "--model", "torus:n=2,r=2,K=0", "--directions", "0,5",
                     "--order", "4"], tmp_path)
    assert code == 0
    polys = [o["poly"] for o in report(doc, "kuranishi")["info"]["obstruction"]]
    assert polys.count("2·t1·t2") == 1 and set(polys) == {"0", "2·t1·t2"}
    assert "2·t1·t2" in capsys.readouterr().out


def test_directions_by_label(tmp_path):
    code, doc = run(["kuranishi", "--model", "n2r2K0", "--directions",
                     "Q:e12*dzb1,Q:e21*dzb2", "--order", "3"], tmp_path)
    assert code == 0
    assert report(doc, "kuranishi")["info"]["directions"] == [0, 5]


def test_cohomology_of_curve(tmp_path):
    code, doc = run(["cohomology", "--model", "torus:n=1,r=1,K=2"], tmp_path)
    assert code == 0
    dims = report(doc, "cohomology")["info"]["dims"]
    assert {"sector": "A", "q": 1, "dim": 2} in dims


def test_corrupted_model_fails_validation(tmp_path, capsys):
    obj = model_to_json(cached_model("n2r2K0"))
    rng = np.random.default_rng(0)
    for q in range(2):
        mat = obj["tensors"]["dbar"]["Q"][q]
        mat["re"] = rng.standard_normal(len(mat["re"])).tolist()
    path = tmp_path / "bad.dgla.json"
    path.write_text(json.dumps(obj))
    code, doc = run(["validate", "--model", str(path)], tmp_path)
    assert code == 1
    assert "validate_model: dbar^2" in doc["failures"]
    assert "validate_model: dbar^2" in capsys.readouterr().err


def test_truncated_model_file_is_a_config_error(tmp_path, capsys):
    raw = save_model(cached_model("n1r1K2"))
    path = tmp_path / "cut.dgla.json"
    path.write_bytes(raw[:100])
    assert main(["validate", "--model", str(path)]) == 2
    assert "ParseError" in capsys.readouterr().err


def test_saved_model_validates(tmp_path):
    path = tmp_path / "ok.dgla.json"
    path.write_bytes(save_model(cached_model("n2r1K1c11")))
    code, doc = run(["validate", "--model", str(path), "--samples", "3"], tmp_path)
    assert code == 0 and doc["passed"]


@pytest.mark.parametrize("argv", [
    ["validate", "--model", "torus:n=2,r=1"],
    ["validate", "--model", "torus:n=2,r=1,K=1,z=3"],
    ["validate", "--model", "torus:n=2,r=1,K=1,c=(1,1"],
    ["validate", "--model", "sphere:n=1"],
    ["validate", "--model", "torus:n=3,r=1,K=0"],
    ["validate", "--model", "n1r1K2", "--tol", "0"],
    ["kuranishi", "--model", "n1r1K2", "--order", "0"],
    ["kuranishi", "--model", "n2r2K0", "--directions", "40"],
    ["kuranishi", "--model", "n2r2K0", "--directions", "Q:nothing"],
    ["kuranishi", "--model", "n2r2K0", "--directions", "0,5", "--points", "0.1"],
    ["validate"],
    ["frobnicate", "--model", "n1r1K2"],
])
def test_config_errors_exit_2(argv):
    assert main(argv) == 2


def test_shorthand_parsing(tmp_path):
    cfg = parse_model_spec("torus:n=2,r=1,K=1,c=(1,1)")
    assert (cfg.n, cfg.r, cfg.K, cfg.twist) == (2, 1, 1, (1, 1))
    pot = tmp_path / "u.json"
    pot.write_text(json.dumps({"potential": [{"k": [1, 0], "re": 0.1, "im": 0},
                                             {"k": [-1, 0], "re": 0.1, "im": 0}]}))
    cfg = parse_model_spec(f"torus:n=1,r=1,K=2,u={pot}")
    assert cfg.potential == {(1, 0): 0.1, (-1, 0): 0.1}
    with pytest.raises(ConfigError):
        parse_model_spec("torus:n=1,n=1,r=1,K=1")
    with pytest.raises(ConfigError):
        parse_model_spec(f"torus:n=1,r=1,K=2,u={tmp_path / 'missing.json'}")


def test_potential_file_reaches_the_appendix(tmp_path):
    pot = tmp_path / "u.json"
    pot.write_text(json.dumps([{"k": [1, 0], "re": 0.1}, {"k": [-1, 0], "re": 0.1}]))
    code, doc = run(["appendix", "--model", f"torus:n=1,r=2,K=3,u={pot}", "--samples", "10"],
                    tmp_path)
    assert code == 0
    echo = report(doc, "intertwiner")["info"]["metric_potential"]
    assert sorted(e["k"] for e in echo) == [[-1, 0], [1, 0]]


def test_tolerance_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("PAIRDEF_TOL", "1e-9")
    code, doc = run(["cohomology", "--model", "n1r1K2"], tmp_path)
    assert code == 0 and doc["tol"] == 1e-9
    code, doc = run(["cohomology", "--model", "n1r1K2", "--tol", "1e-8"], tmp_path, "b")
    assert doc["tol"] == 1e-8
    monkeypatch.setenv("PAIRDEF_TOL", "tiny")
    assert main(["cohomology", "--model", "n1r1K2"]) == 2


def test_reports_are_byte_identical(tmp_path):
    argv = ["les", "--model", "n2r1K1c11", "--order", "3", "--seed", "5"]
    main(argv + ["--json", str(tmp_path / "a.json"), "--text", str(tmp_path / "a.txt")])
    main(argv + ["--json", str(tmp_path / "b.json"), "--text", str(tmp_path / "b.txt")])
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    assert (tmp_path / "a.txt").read_bytes() == (tmp_path / "b.txt").read_bytes()
    assert json.loads((tmp_path / "a.json").read_text())["seed"] == 5


def test_les_command_runs_diagram(tmp_path):
    code, doc = run(["les", "--model", "n2r2K0", "--order", "3"], tmp_path)
    assert code == 0
    diag = report(doc, "obstruction_diagram")
    assert {ln["name"] for ln in diag["lines"]} == {"left square", "right square"}
    crit = report(doc, "unobstructed_criterion")
    assert "sufficient, not necessary" in crit["info"]["verdict"]


def test_all_command(tmp_path):
    code, doc = run(["all", "--model", "n2r2K0", "--order", "3", "--samples", "3"], tmp_path)
    assert code == 0
    titles = [r["title"] for r in doc["reports"]]
    for t in ("validate_model", "validate_dgla", "hodge", "cohomology", "kuranishi",
              "exactness_check", "intertwiner_check"):
        assert t in titles


def test_text_summary_file(tmp_path):
    txt = tmp_path / "s.txt"
    assert main(["appendix", "--model", "n1r2K4u", "--samples", "5", "--text", str(txt)]) == 0
    lines = txt.read_text().splitlines()
    assert lines[-1] == "RESULT: PASS"
    assert any(ln.strip().startswith("intertwiner") for ln in lines)


def test_console_entry_point():
    out = subprocess.run([sys.executable, "-m", "pairdef.cli", "cohomology", "--model",
                          "n1r1K2"], capture_output=True, text=True, check=False)
    assert out.returncode == 0
    assert "RESULT: PASS" in out.stdout
