import csv
import json
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from lrqoct.cli import fmt, main

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
GOLDEN = Path(__file__).resolve().parent / "golden"


def read_columns(path):
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    return {k: np.array([float(r[k]) for r in rows]) for k in rows[0]}


def run(*argv):
    return main([str(a) for a in argv])


def test_fmt_is_17_digits():
    assert fmt(0.1) == "0.10000000000000001"
    assert fmt(3) == "3"
    with pytest.raises(FloatingPointError):
        fmt(float("nan"))


@pytest.mark.parametrize("config", sorted(CONFIGS.glob("*.json")), ids=lambda p: p.stem)
def test_shipped_configs_validate(config, capsys):
    assert run("validate", config) == 0
    assert json.loads(capsys.readouterr().out)["status"] == "ok"


def test_validate_non_hermitian(tmp_path, capsys):
    raw = json.loads((CONFIGS / "rabi.json").read_text())
    raw["system"] = {"dim": 2, "h_static": [[[0, 0], [1, 0]], [[0, 0], [0, 0]]],
                     "coupling": [[[0, 0], [1, 0]], [[1, 0], [0, 0]]]}
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(raw))
    assert run("validate", path) == 1
    assert "system.h_static" in capsys.readouterr().err


def test_gradient_adjoint_vs_fd(tmp_path):
    assert run("gradient", CONFIGS / "rabi.json", "--route", "adjoint", "--out", tmp_path / "a") == 0
    assert run("gradient", CONFIGS / "rabi.json", "--route", "fd", "--out", tmp_path / "f") == 0
    adj = json.loads((tmp_path / "a" / "gradient.json").read_text())
    fd = json.loads((tmp_path / "f" / "gradient.json").read_text())
    assert adj["route"] == "adjoint" and fd["route"] == "fd"
    a, f = np.array(adj["values"]), np.array(fd["values"])
    assert np.max(np.abs(a - f)) <= 1e-5 * np.max(np.abs(f))


def test_contour_check_matches_respond(tmp_path):
    assert run("respond", CONFIGS / "rabi.json", "--out", tmp_path / "r") == 0
    assert run("contour-check", CONFIGS / "rabi.json", "--out", tmp_path / "c") == 0
    resp = read_columns(tmp_path / "r" / "kernel.csv")
    cc = read_columns(tmp_path / "c" / "kernel.csv")
    np.testing.assert_array_equal(resp["tau"], cc["tau"])
    assert np.max(np.abs(cc["re_difference"] - resp["re_chi"])) <= 1e-12
    assert np.max(np.abs(cc["im_difference"] - resp["im_chi"])) <= 1e-12
    report = json.loads((tmp_path / "c" / "contour_check.json").read_text())
    assert report["passed"] is True


def test_simulate_outputs(tmp_path, capsys):
    assert run("simulate", CONFIGS / "rabi.json", "--out", tmp_path) == 0
    traj = read_columns(tmp_path / "trajectory.csv")
    assert list(traj) == ["t", "pop_0", "pop_1", "expect_A"]
    assert traj["pop_1"][-1] == pytest.approx(0.5, abs=1e-8)
    pulse = read_columns(tmp_path / "pulse.csv")
    assert np.all(pulse["epsilon"] == np.pi / 4)
    assert json.loads(capsys.readouterr().out)["merit"] == pytest.approx(0.5, abs=1e-8)


def test_json_format(tmp_path):
    assert run("respond", CONFIGS / "rabi.json", "--out", tmp_path, "--format", "json") == 0
    table = json.loads((tmp_path / "kernel.json").read_text())
    assert table["columns"] == ["tau", "re_chi", "im_chi"]
    assert len(table["rows"]) == 1001


def test_optimize_route_override(tmp_path):
    assert run("optimize", CONFIGS / "tls_transfer.json", "--route", "response", "--out", tmp_path) == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["route"] == "response"
    assert summary["final_merit"] > 0.999


def test_numerical_failure_exit_code(tmp_path, capsys):
    code = run("gradient", CONFIGS / "tls_time_dependent.json", "--route", "contour", "--out", tmp_path)
    assert code == 2
    assert "final-time" in capsys.readouterr().err


def test_bad_fd_step(tmp_path):
    assert run("gradient", CONFIGS / "rabi.json", "--fd-step", "-1", "--out", tmp_path) == 1


@pytest.mark.parametrize(
    "argv, golden",
    [
        (("gradient", "rabi.json", "--route", "adjoint"), {"gradient.json": "rabi_gradient.json"}),
        (("optimize", "tls_transfer.json"),
         {"summary.json": "tls_transfer_summary.json", "trace.csv": "tls_transfer_trace.csv"}),
        (("respond", "tls_time_dependent.json"), {"kernel.csv": "tls_time_dependent_kernel.csv"}),
    ],
)
def test_golden_bytes(tmp_path, argv, golden):
    cmd, config, *rest = argv
    for name in ("first", "second"):
        assert run(cmd, CONFIGS / config, *rest, "--out", tmp_path / name) == 0
    for produced, reference in golden.items():
        first = (tmp_path / "first" / produced).read_bytes()
        assert first == (tmp_path / "second" / produced).read_bytes()
        assert first == (GOLDEN / reference).read_bytes()


@pytest.mark.skipif(shutil.which("lrqoct") is None, reason="console script not installed")
def test_console_script(tmp_path):
    done = subprocess.run(["lrqoct", "validate", str(CONFIGS / "rabi.json")], capture_output=True, text=True)
    assert done.returncode == 0
    done = subprocess.run([sys.executable, "-m", "lrqoct", "validate", str(tmp_path / "none.json")],
                          capture_output=True, text=True)
    assert done.returncode == 1
    assert "cannot read" in done.stderr
