import copy
import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from lipcodesign import configio
from lipcodesign.cli import main

BUNDLED = json.loads(configio.bundled_config_path().read_text())


def run(*argv):
    buf = io.StringIO()
    code = main(list(map(str, argv)), out=buf)
    return code, buf.getvalue()


def write(tmp_path, doc, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


@pytest.fixture(scope="module")
def codesign_out(tmp_path_factory):
    out = tmp_path_factory.mktemp("codesign")
    code, text = run("codesign", configio.bundled_config_path(), "--out", out)
    return code, text, out


class TestValidate:
    def test_bundled(self):
        code, text = run("validate", configio.bundled_config_path())
        assert code == 0
        assert "R = [[1.]]" in text

    def test_cross_term(self, tmp_path):
        doc = copy.deepcopy(BUNDLED)
        doc["plant"]["C"][3][0] = 1.0
        code, text = run("validate", write(tmp_path, doc))
        assert code == 1
        assert any(line.startswith("A3") and "FAIL" in line for line in text.splitlines())

    def test_truncated(self, tmp_path):
        path = tmp_path / "cut.json"
        path.write_text(configio.bundled_config_path().read_text()[:200])
        code, text = run("validate", path)
        assert code == 2
        assert "line" in text and "column" in text

    def test_schema_path(self, tmp_path):
        doc = copy.deepcopy(BUNDLED)
        doc["codesign"]["eps_g"] = -1.0
        code, text = run("validate", write(tmp_path, doc))
        assert code == 2 and "codesign/eps_g" in text

    def test_dimension_mismatch(self, tmp_path):
        doc = copy.deepcopy(BUNDLED)
        doc["plant"]["dimensions"]["n_x"] = 3
        code, text = run("validate", write(tmp_path, doc))
        assert code == 2 and "plant/dimensions/n_x" in text

    def test_missing_file(self, tmp_path):
        assert run("validate", tmp_path / "absent.json")[0] == 2


class TestCodesign:
    def test_manipulator_report(self, codesign_out):
        code, _, out = codesign_out
        assert code == 0
        rep = json.loads((out / "report.json").read_text())
        assert rep["initial_original"]["delta0"] == pytest.approx(0.86, abs=0.01)
        assert rep["initial_original"]["feasible"] is False
        assert rep["initial_transformed"]["delta0"] == pytest.approx(0.47, abs=0.01)
        assert rep["initial_transformed"]["feasible"] is True
        assert rep["status"] == "converged"
        assert rep["improvement_percent"] > 0
        assert len(rep["iterations"]) > 1
        assert 0.002 <= rep["final_d"][0] <= 0.1

    def test_identity_transform(self, tmp_path):
        doc = copy.deepcopy(BUNDLED)
        doc["codesign"]["transform"] = {"diag": [1.0, 1.0, 1.0, 1.0]}
        code, text = run("codesign", write(tmp_path, doc), "--out", tmp_path / "o")
        assert code == 4
        rep = json.loads((tmp_path / "o" / "report.json").read_text())
        assert rep["status"] == "infeasible"
        assert rep["delta0"] == pytest.approx(0.86, abs=0.01)
        assert rep["threshold"] == pytest.approx(3.33, abs=0.01)

    def test_linear_plant(self, tmp_path):
        doc = {"plant": {"A0": [[-1.0, 0.5], [0.0, -2.0]], "B": [[0.0], [1.0]],
                         "B_w": [[1.0], [0.0]], "C": [[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]],
                         "D": [[0.0], [0.0], [1.0]],
                         "A_terms": [{"index": 0, "matrix": [[-1.0, 0.0], [0.0, 0.0]]}],
                         "d_lower": [0.0], "d_upper": [1.0]},
               "codesign": {"mu": 0.1, "initial_d": [0.5]}}
        code, _ = run("codesign", write(tmp_path, doc), "--out", tmp_path / "o")
        assert code == 0
        rep = json.loads((tmp_path / "o" / "report.json").read_text())
        assert rep["initial_transformed"] is None
        assert rep["transform"] == np.eye(2).tolist()

    def test_not_converged(self, tmp_path):
        doc = copy.deepcopy(BUNDLED)
        doc["codesign"]["max_iters"] = 3
        code, _ = run("codesign", write(tmp_path, doc), "--out", tmp_path / "o")
        assert code == 3
        rep = json.loads((tmp_path / "o" / "report.json").read_text())
        assert rep["status"] == "not_converged" and len(rep["iterations"]) == 3


class TestSimulate:
    def test_from_report(self, codesign_out, tmp_path):
        _, _, out = codesign_out
        code, _ = run("simulate", configio.bundled_config_path(), "--gains",
                      out / "report.json", "--out", tmp_path)
        assert code == 0
        with open(tmp_path / "trajectory.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["t", "x1", "x2", "x3", "x4", "u1", "z1", "z2", "z3", "z4", "w1"]
        assert len(rows) == 10002
        last = np.array(rows[-1], dtype=float)
        assert last[0] == pytest.approx(10.0)
        assert np.abs(last[1:5]).max() < 0.05
        summary = json.loads((tmp_path / "bound_summary.json").read_text())
        assert summary["certified"] and summary["passed"]

    def test_zero_horizon(self, tmp_path):
        doc = copy.deepcopy(BUNDLED)
        doc["simulate"]["t_end"] = 0
        doc["simulate"]["gains"] = [[-9.37, -1.32, 4.46, -1.145]]
        code, _ = run("simulate", write(tmp_path, doc), "--gains", "inline", "--out", tmp_path)
        assert code == 0
        lines = (tmp_path / "trajectory.csv").read_text().splitlines()
        assert len(lines) == 1 and lines[0].startswith("t,x1")

    def test_unstable_gain(self, tmp_path):
        doc = copy.deepcopy(BUNDLED)
        doc["simulate"]["gains"] = [[0.0, 0.0, 0.0, 50.0]]
        code, text = run("simulate", write(tmp_path, doc), "--gains", "inline", "--out", tmp_path)
        assert code == 5 and "diverged at t" in text

    def test_inline_missing(self, tmp_path):
        code, _ = run("simulate", configio.bundled_config_path(), "--gains", "inline",
                      "--out", tmp_path)
        assert code == 2


def test_deterministic(tmp_path):
    doc = copy.deepcopy(BUNDLED)
    doc["codesign"]["max_iters"] = 40
    doc["simulate"]["t_end"] = 1.0
    cfg = write(tmp_path, doc)
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        run("codesign", cfg, "--out", out)
        run("simulate", cfg, "--gains", out / "report.json", "--out", out)
        outs.append(out)
    for name in ("report.json", "trajectory.csv", "bound_summary.json"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_gain_round_trip(codesign_out, manipulator):
    _, _, out = codesign_out
    rep = json.loads((out / "report.json").read_text())
    d = np.array(rep["final_d"])
    K = np.array(rep["final_K_original"])
    stored = np.array(rep["closed_loop_eigenvalues"])
    stored = stored[:, 0] + 1j * stored[:, 1]
    fresh = np.sort_complex(np.linalg.eigvals(manipulator.closed_loop(d, K)))
    np.testing.assert_allclose(fresh, stored, atol=1e-12)


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "lipcodesign", "--help"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert "validate" in proc.stdout and "simulate" in proc.stdout
