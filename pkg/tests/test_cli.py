import json
import subprocess
import sys

import pytest

CLI = [sys.executable, "-m", "mapsched"]


def run_cli(*args, env=None):
    import os

    full_env = dict(os.environ)
    if env:
        full_env.update(env)
    return subprocess.run(
        [*CLI, *args], capture_output=True, text=True, env=full_env, timeout=300
    )


@pytest.fixture(scope="module")
def ident_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("ident") / "samples.csv"
    rows = [(-4, -41.0), (-3, -23.0), (-2, -9.8), (2, 9.3), (3, 23.2), (4, 40.0)]
    path.write_text("voltage,velocity\n" + "\n".join(f"{v},{w}" for v, w in rows) + "\n")
    return path


@pytest.fixture(scope="module")
def scenario_cfg(tmp_path_factory):
    path = tmp_path_factory.mktemp("scen") / "scenario.cfg"
    path.write_text(
        "reference = sine\n"
        "amplitude = 2.0\n"
        "duration = 1.0\n"
        "seed = 9\n"
        "friction = window\n"
        "load_start = 0.3\n"
        "load_end = 0.7\n"
        "discretization = zoh\n"
    )
    return path


def test_ident_prints_slope_and_coefficient(ident_csv):
    out = run_cli("ident", str(ident_csv))
    assert out.returncode == 0
    assert "slope mu" in out.stdout
    assert "viscous coeff b" in out.stdout
    assert "residual rms" in out.stdout


def test_gains_reports_stable_loops():
    out = run_cli("gains")
    assert out.returncode == 0
    assert "vertex 1" in out.stdout and "vertex 2" in out.stdout
    assert "closed-loop |eig|" in out.stdout


def test_gains_json_export(tmp_path):
    target = tmp_path / "gains.json"
    out = run_cli("gains", "--json", str(target))
    assert out.returncode == 0
    payload = json.loads(target.read_text())
    assert len(payload["vertices"]) == 2


def test_certify_success_exit_zero():
    out = run_cli("certify")
    assert out.returncode == 0
    assert "certified: yes" in out.stdout
    assert "eps_star" in out.stdout


def test_certify_failure_exit_three():
    # an epsilon far beyond the certified budget is a certification failure
    out = run_cli("certify", "--epsilon", "1.0")
    assert out.returncode == 3
    assert "certification failed" in out.stderr


def test_invalid_config_exit_one(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("controler = maps\n")
    out = run_cli("run", str(bad))
    assert out.returncode == 1
    assert "invalid config" in out.stderr


def test_missing_file_exit_one(tmp_path):
    out = run_cli("run", str(tmp_path / "nope.cfg"))
    assert out.returncode == 1


def test_numerical_failure_exit_two(tmp_path):
    # forward Euler with a microsecond electrical constant at a 2 ms tick is
    # far outside the solvable regime: the Riccati iteration diverges
    cfg = tmp_path / "stiff.cfg"
    cfg.write_text("lm = 1e-6\n")
    out = run_cli("gains", "--motor", str(cfg))
    assert out.returncode == 2
    assert "numerical failure" in out.stderr


def test_run_writes_outputs(tmp_path, scenario_cfg):
    out_dir = tmp_path / "out"
    out = run_cli("run", str(scenario_cfg), "--out", str(out_dir))
    assert out.returncode == 0
    assert (out_dir / "trace.csv").exists()
    assert (out_dir / "plot.csv").exists()
    metrics = json.loads((out_dir / "metrics.json").read_text())
    assert metrics["seed"] == 9
    assert "rmse" in metrics


def test_run_byte_identical_reruns(tmp_path, scenario_cfg):
    d1, d2 = tmp_path / "r1", tmp_path / "r2"
    assert run_cli("run", str(scenario_cfg), "--out", str(d1)).returncode == 0
    assert run_cli("run", str(scenario_cfg), "--out", str(d2)).returncode == 0
    assert (d1 / "trace.csv").read_bytes() == (d2 / "trace.csv").read_bytes()


def test_maps_seed_env_override(tmp_path, scenario_cfg):
    d1 = tmp_path / "seeded"
    out = run_cli("run", str(scenario_cfg), "--out", str(d1), env={"MAPS_SEED": "123"})
    assert out.returncode == 0
    metrics = json.loads((d1 / "metrics.json").read_text())
    assert metrics["seed"] == 123


def test_compare_default_variants(scenario_cfg, tmp_path):
    out_csv = tmp_path / "cmp.csv"
    out = run_cli("compare", str(scenario_cfg), "--out", str(out_csv))
    assert out.returncode == 0
    assert "maps" in out.stdout and "fixed" in out.stdout
    assert out_csv.exists()


def test_compare_custom_variants(scenario_cfg):
    out = run_cli(
        "compare", str(scenario_cfg),
        "--variant", "a=maps/imm", "--variant", "b=fixed:1/kf:1",
    )
    assert out.returncode == 0
    assert "a" in out.stdout and "b" in out.stdout
