"""End-to-end command line tests.

Each test drives the installed entry point through ``python -m slipflow`` in
a scratch directory with a small 8-mode configuration, checking exit codes,
artifact sets, and the JSON error contract.
"""
import json
import subprocess
import sys

import pytest
import yaml

TWO_PI = 6.283185307179586

CONFIG = {
    "format_version": 1,
    "domain": {"geometry": "torus", "lengths": [TWO_PI, TWO_PI, TWO_PI]},
    "discretization": {"num_modes": 8},
    "physics": {"viscosity": 0.1, "damping_coefficient": 1.0,
                "damping_exponent": 3.0},
    "time": {"dt": 1e-2, "t_final": 0.05, "scheme": "imex-cn",
             "picard_tol": 1e-12},
    "forcing": {"kind": "none"},
    "initial": {"kind": "random", "seed": 5, "amplitude": 0.5, "decay": 0.5,
                "decay_variable": "sqrt_h1"},
    "output": {"directory": "runs/out"},
    "study": {"epsilons": [1e-3, 5e-4], "twin_seed": 6, "seed": 11,
              "decay": 4.0, "t_final": 0.1},
}


def write_config(directory, override=None):
    data = json.loads(json.dumps(CONFIG))
    for section, patch in (override or {}).items():
        data[section].update(patch)
    path = directory / "run.yaml"
    path.write_text(yaml.safe_dump(data))
    return path


def run_cli(args, cwd):
    return subprocess.run([sys.executable, "-m", "slipflow", *args],
                          cwd=cwd, capture_output=True, text=True,
                          timeout=300)


@pytest.fixture(scope="module")
def simulate_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("sim")
    cfg = write_config(root)
    proc = run_cli(["simulate", str(cfg), "--output", "artifacts"], root)
    return root / "artifacts", proc


def test_simulate_exit_code_and_stdout(simulate_run):
    _, proc = simulate_run
    assert proc.returncode == 0, proc.stderr
    assert "simulate:" in proc.stdout
    assert "energy" in proc.stdout


def test_simulate_artifacts(simulate_run):
    outdir, _ = simulate_run
    for name in ("energy.csv", "states.csv", "energy.png", "summary.json",
                 "manifest.json", "runtime.txt"):
        assert (outdir / name).exists(), name
    assert (outdir / "energy.png").stat().st_size > 1000
    summary = json.loads((outdir / "summary.json").read_text())
    assert summary["num_modes"] == 8
    assert summary["num_steps"] == 5
    assert summary["final_energy"] < summary["initial_energy"]
    assert summary["max_energy_increase"] <= 1e-12


def test_simulate_manifest(simulate_run):
    outdir, _ = simulate_run
    manifest = json.loads((outdir / "manifest.json").read_text())
    assert manifest["format_version"] == 1
    assert manifest["package_version"]
    assert manifest["command"][0] == "slipflow"
    assert manifest["command"][1] == "simulate"
    assert manifest["config"]["discretization"]["num_modes"] == 8
    assert len(manifest["basis_hash"]) == 64
    assert manifest["seeds"] == {"initial": 5, "study": 11, "twin": 6}
    assert manifest["artifacts"] == ["energy.csv", "energy.png", "states.csv",
                                     "summary.json"]


def test_output_flag_overrides_config(tmp_path):
    cfg = write_config(tmp_path)
    proc = run_cli(["simulate", str(cfg), "--output", "elsewhere"], tmp_path)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "elsewhere" / "summary.json").exists()
    assert not (tmp_path / "runs").exists()


def test_output_from_config_directory(tmp_path):
    cfg = write_config(tmp_path)
    proc = run_cli(["simulate", str(cfg)], tmp_path)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "runs" / "out" / "summary.json").exists()


def test_verify_basis_passes(tmp_path):
    cfg = write_config(tmp_path)
    proc = run_cli(["verify-basis", str(cfg), "--output", "cert"], tmp_path)
    assert proc.returncode == 0, proc.stderr
    assert "[pass]" in proc.stdout
    cert = json.loads((tmp_path / "cert" / "certification.json").read_text())
    assert cert["pass"] is True
    assert (tmp_path / "cert" / "basis.bin").exists()
    assert (tmp_path / "cert" / "stiffness.bin").exists()


def test_energy_report_passes(tmp_path):
    cfg = write_config(tmp_path)
    proc = run_cli(["energy-report", str(cfg), "--output", "rep"], tmp_path)
    assert proc.returncode == 0, proc.stderr
    report = json.loads((tmp_path / "rep" / "report.json").read_text())
    assert report["inequality"]["pass"] is True
    assert report["max_step_residual"] >= 0.0


def test_mms_pass_and_fail_exit_codes(tmp_path):
    ok = run_cli(["mms", "--case", "slab-default", "--dt", "1e-2",
                  "--t-final", "0.05", "--tolerance", "1.0",
                  "--output", "mms-ok"], tmp_path)
    assert ok.returncode == 0, ok.stderr
    bad = run_cli(["mms", "--case", "slab-default", "--dt", "1e-2",
                   "--t-final", "0.05", "--tolerance", "1e-30",
                   "--output", "mms-bad"], tmp_path)
    assert bad.returncode == 1
    assert "FAIL" in bad.stdout
    report = json.loads((tmp_path / "mms-bad" / "mms.json").read_text())
    assert report["error"] > 1e-30


def test_converge_time_quick(tmp_path):
    proc = run_cli(["converge-time", "--case", "slab-default",
                    "--dts", "2e-2,1e-2", "--t-final", "0.1",
                    "--order-min", "1.5", "--order-max", "2.5",
                    "--output", "ct"], tmp_path)
    assert proc.returncode == 0, proc.stderr
    report = json.loads((tmp_path / "ct" / "convergence.json").read_text())
    assert report["pass"] is True
    assert (tmp_path / "ct" / "temporal.png").exists()


def test_converge_space_quick(tmp_path):
    cfg = write_config(tmp_path)
    proc = run_cli(["converge-space", str(cfg), "--mode-counts", "8,16",
                    "--min-ratio", "1.05", "--output", "cs"], tmp_path)
    assert proc.returncode == 0, proc.stderr
    report = json.loads((tmp_path / "cs" / "spatial.json").read_text())
    assert report["pass"] is True
    assert report["mode_counts"] == [8, 16]
    assert (tmp_path / "cs" / "spatial.png").exists()


def test_twin_quick(tmp_path):
    cfg = write_config(tmp_path)
    proc = run_cli(["twin", str(cfg), "--output", "tw"], tmp_path)
    assert proc.returncode == 0, proc.stderr
    report = json.loads((tmp_path / "tw" / "twin.json").read_text())
    assert report["pass"] is True
    assert report["control_gap_sq"] == 0.0
    assert (tmp_path / "tw" / "twin.png").exists()


def test_bad_config_exit_2(tmp_path):
    cfg = write_config(tmp_path, {"physics": {"viscosity": -1.0}})
    proc = run_cli(["simulate", str(cfg), "--output", "x"], tmp_path)
    assert proc.returncode == 2
    err = json.loads(proc.stdout)
    assert err["error"]["type"] == "ConfigValidationError"
    assert "physics.viscosity" in err["error"]["message"]


def test_unknown_case_exit_2(tmp_path):
    proc = run_cli(["mms", "--case", "nope", "--output", "x"], tmp_path)
    assert proc.returncode == 2
    err = json.loads(proc.stdout)
    assert err["error"]["type"] == "KeyError"
    assert "available" in err["error"]["message"]


def test_missing_output_exit_2(tmp_path):
    proc = run_cli(["mms", "--case", "slab-default"], tmp_path)
    assert proc.returncode == 2
    err = json.loads(proc.stdout)
    assert "output" in err["error"]["message"]
