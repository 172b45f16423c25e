import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from isomonodromy.cli import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, EXIT_VALIDATION, run

CONFIGS = Path(__file__).resolve().parents[1] / "demos" / "configs"


def load(name):
    return json.loads((CONFIGS / name).read_text())


def write(tmp_path, job, name="job.json"):
    path = tmp_path / name
    path.write_text(json.dumps(job))
    return str(path)


def report(out):
    return json.loads((Path(out) / "report.json").read_text())


def test_validate_rank_one_pair(tmp_path):
    out = tmp_path / "out"
    code = run(["validate", "--config", str(CONFIGS / "rank_one.json"), "--out", str(out)])
    assert code == EXIT_OK
    body = report(out)
    assert body["result"]["residue_sum_norm"] == 0.0
    assert body["version"] and body["echo"]["params"]["tol"] > 0


def test_monodromy_on_diagonal_connection_is_trivial(tmp_path):
    out = tmp_path / "out"
    assert run(["monodromy", "--config", str(CONFIGS / "diagonal.json"), "--out", str(out)]) == 0
    pole = report(out)["result"]["poles"][0]
    for S in pole["S"]:
        matrix = np.array(S)[..., 0] + 1j * np.array(S)[..., 1]
        assert np.allclose(matrix, np.eye(2), atol=1e-10)


def test_stokes_and_orbit_commands(tmp_path):
    for command in ("stokes", "orbit"):
        out = tmp_path / command
        assert run([command, "--config", str(CONFIGS / "dubrovin.json"), "--out", str(out)]) == 0
        assert report(out)["status"] == "ok"


def test_jmu_on_schlesinger_config_writes_trajectory(tmp_path):
    out = tmp_path / "out"
    code = run(["jmu", "--config", str(CONFIGS / "schlesinger_loop.json"), "--out", str(out),
                "--checkpoints", "2"])
    assert code == EXIT_OK
    body = report(out)["result"]
    assert body["monodromy_drift"] <= 1e-6
    assert body["symplectic_drift"] <= 1e-5
    lines = (out / "trajectory.csv").read_text().splitlines()
    assert lines[0].startswith("step,arclength,pole0_re")
    assert len(lines) == 4


def test_schlesinger_command(tmp_path):
    out = tmp_path / "out"
    code = run(["schlesinger", "--config", str(CONFIGS / "schlesinger_loop.json"),
                "--out", str(out), "--checkpoints", "2"])
    assert code == EXIT_OK
    assert report(out)["result"]["monodromy_drift"] <= 1e-6
    assert (out / "trajectory.csv").exists()


def test_exit_code_for_validation_failure(tmp_path):
    job = load("rank_one.json")
    job["connection"]["poles"][1]["principal_part"] = [[[[-0.1, 0.0]]]]
    out = tmp_path / "out"
    assert run(["validate", "--config", write(tmp_path, job), "--out", str(out)]) == EXIT_VALIDATION
    assert "validation" in report(out)["message"]


def test_exit_code_for_unmet_tolerance(tmp_path):
    job = load("rank_one.json")
    job["limits"] = {"relation": 1e-300, "degree": -1.0}
    out = tmp_path / "out"
    assert run(["monodromy", "--config", write(tmp_path, job), "--out", str(out)]) == EXIT_NUMERICAL
    assert report(out)["status"] == "failed"


@pytest.mark.parametrize("content", ["not json", json.dumps({"seed": 1}),
                                     json.dumps({"connection": {"rank": 2}}),
                                     json.dumps({"connection": {"rank": 1, "poles": []},
                                                 "params": {"bogus": 1}})])
def test_exit_code_for_config_errors(tmp_path, content):
    path = tmp_path / "bad.json"
    path.write_text(content)
    out = tmp_path / "out"
    assert run(["validate", "--config", str(path), "--out", str(out)]) == EXIT_CONFIG
    assert report(out)["status"] == "config_error"


def test_missing_config_file(tmp_path):
    out = tmp_path / "out"
    assert run(["check", "--config", str(tmp_path / "absent.json"), "--out", str(out)]) == EXIT_CONFIG


def test_flow_command_without_path_is_a_config_error(tmp_path):
    out = tmp_path / "out"
    assert run(["jmu", "--config", str(CONFIGS / "rank_one.json"), "--out", str(out)]) == EXIT_CONFIG


def test_negative_tolerance_flag_is_a_config_error(tmp_path):
    out = tmp_path / "out"
    code = run(["validate", "--config", str(CONFIGS / "rank_one.json"), "--out", str(out),
                "--tol", "-1"])
    assert code == EXIT_CONFIG


def test_reports_are_byte_identical_for_identical_inputs(tmp_path):
    bodies = []
    for name in ("a", "b"):
        out = tmp_path / name
        run(["check", "--config", str(CONFIGS / "dubrovin.json"), "--out", str(out), "--seed", "3"])
        bodies.append((out / "report.json").read_bytes())
    assert bodies[0] == bodies[1]


def test_module_entry_point(tmp_path):
    out = tmp_path / "out"
    proc = subprocess.run([sys.executable, "-m", "isomonodromy", "validate", "--config",
                           str(CONFIGS / "rank_one.json"), "--out", str(out)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
