import json
import math
import subprocess
import sys

import pytest

from lagflow.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


def test_verify_passes(capsys):
    code, out = run(capsys, "verify", "clifford:a=-0.5", "--grid", "32")
    doc = json.loads(out)
    assert code == 0 and doc["ok"]
    assert set(doc["pass"]) >= {"lagrangian", "self_similar", "monotonicity", "structure", "beta_harmonic"}


def test_verify_fd_mode(capsys):
    code, out = run(capsys, "verify", "psi:a=-0.5,m=1,n=2", "--grid", "24", "--mode", "fd")
    assert code == 0 and json.loads(out)["jet_mode"] == "fd"


def test_verify_failure_exit_code(capsys):
    code, out = run(capsys, "verify", "phi:a=1,delta=1", "--grid", "16", "--tol", "self_similar=1e-30")
    doc = json.loads(out)
    assert code == 1 and not doc["ok"] and not doc["pass"]["self_similar"]


@pytest.mark.parametrize("argv,error", [
    (["verify", "psi:a=1,nu=1"], "BadParams"),
    (["verify", "clifford:a=-0.5", "--tol", "bogus=1"], "UsageError"),
    (["verify", "clifford:a=-0.5", "--tol", "lagrangian"], "UsageError"),
    (["area", "clifford:a=-0.5", "--format", "xml"], "UsageError"),
    (["sample", "clifford:a=-0.5", "--format", "xml"], "UsageError"),
    (["bogus", "clifford:a=-0.5"], "UsageError"),
    (["classify", "cone:a=1,delta=1"], "WrongFamily"),
    (["flow", "clifford:a=-0.5", "--grid", "16"], "BadResolution"),
    (["sample", "clifford:a=-0.5", "--format", "obj", "--pole", "1,2"], "UsageError"),
])
def test_usage_errors_exit_2(capsys, argv, error):
    code, out = run(capsys, *argv)
    doc = json.loads(out)
    assert code == 2 and doc["error"] == error and doc["message"]


def test_numerical_failure_exit_1(capsys):
    code, out = run(capsys, "flow", "clifford:a=-0.5", "--grid", "32", "--dt", "1")
    assert code == 1 and json.loads(out)["error"] == "StepTooLarge"


def test_area_and_willmore_closed_forms(capsys):
    code, out = run(capsys, "area", "psi:a=-0.5,m=1,n=2")
    doc = json.loads(out)
    assert code == 0 and doc["grid"] == [256, 256]
    assert doc["closed_form"] == pytest.approx(9 * math.sqrt(2) * math.pi ** 2)
    assert doc["rel_error"] <= 1e-6
    code, out = run(capsys, "willmore", "clifford:a=-0.5", "--grid", "32")
    assert json.loads(out)["rel_error"] <= 1e-12
    # non-compact cells report the quadrature only
    code, out = run(capsys, "area", "phi:a=1,delta=1", "--grid", "32")
    assert "closed_form" not in json.loads(out)


def test_classify_document(capsys):
    code, out = run(capsys, "classify", "upsilon:a=-0.5,gamma=1.0471975511965976")
    doc = json.loads(out)
    assert code == 0
    assert doc["branch"] == "Theorem1(b)(iii)" and doc["family"] == "UpsilonShrinker"
    assert doc["shape_param"] == pytest.approx(math.pi / 3, rel=1e-10)
    assert doc["invariant"]["value"] == pytest.approx(0.25, rel=1e-10)
    assert doc["roundtrip_residual"] <= 1e-10


def test_json_is_byte_identical(capsys):
    first = run(capsys, "classify", "psi:a=-0.5,nu=0.9")[1]
    second = run(capsys, "classify", "psi:a=-0.5,nu=0.9")[1]
    assert first == second
    first = run(capsys, "verify", "phi:a=0.25,p=2,q=1", "--grid", "16")[1]
    second = run(capsys, "verify", "phi:a=0.25,p=2,q=1", "--grid", "16")[1]
    assert first == second
    assert list(json.loads(first)) == sorted(json.loads(first))


def test_flow_outputs(capsys, tmp_path):
    csv_path = tmp_path / "traj.csv"
    code, out = run(capsys, "flow", "psi:a=-0.5,m=1,n=2", "--grid", "32", "--t-end", "0.1",
                    "--out", str(csv_path))
    doc = json.loads(out)
    assert code == 0 and doc["reason"] == "t_end"
    assert doc["area_ratio"] == pytest.approx(doc["expected_area_ratio"], rel=0.02)
    lines = csv_path.read_text().splitlines()
    assert lines[0] == "time,area,max_H,ss_error" and len(lines) == doc["samples"] + 1
    code, out = run(capsys, "flow", "psi:a=-0.5,m=1,n=2", "--grid", "32", "--t-end", "0.05",
                    "--format", "csv")
    assert code == 0 and out.startswith("time,area")


def test_sample_formats(capsys, tmp_path):
    code, out = run(capsys, "sample", "psi:a=-0.5,m=1,n=1", "--grid", "8")
    lines = out.splitlines()
    assert code == 0 and lines[0] == "s,t,x1,y1,x2,y2" and len(lines) == 65
    code, out = run(capsys, "sample", "clifford:a=-0.5", "--grid", "4", "--format", "json")
    assert len(json.loads(out)["rows"]) == 16
    obj = tmp_path / "t.obj"
    code, _ = run(capsys, "sample", "clifford:a=-0.5", "--grid", "8", "--format", "obj",
                  "--projection", "stereo", "--pole", "0,0,0,2", "--out", str(obj))
    text = obj.read_text().splitlines()
    assert sum(1 for l in text if l.startswith("v ")) == 64
    assert sum(1 for l in text if l.startswith("f ")) == 64   # both directions wrap
    meta = json.loads((tmp_path / "t.obj.json").read_text())
    assert meta["projection"] == "stereo" and meta["isometric"] is False


def test_console_script_version():
    proc = subprocess.run([sys.executable, "-m", "lagflow.cli", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("lagflow ")
