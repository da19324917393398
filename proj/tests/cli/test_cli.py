"""End-to-end checks of the command-line front end. RMDP_CLI points at the built binary."""

import csv
import filecmp
import json
import os
import subprocess

import numpy as np
import pytest

CLI = os.environ.get("RMDP_CLI", "rmdp")


def run(*args, cwd=None):
    return subprocess.run([CLI, *map(str, args)], capture_output=True, text=True, cwd=cwd)


def value_of(doc, pi):
    """rho-weighted policy value from an env dump, by a direct linear solve."""
    S, A, gamma = doc["S"], doc["A"], doc["gamma"]
    p = np.array(doc["kernel"])  # [s][a][s']
    c = np.array(doc["cost"])
    p_pi = np.einsum("sa,sat->st", pi, p)
    c_pi = (pi * c).sum(axis=1)
    v = np.linalg.solve(np.eye(S) - gamma * p_pi, c_pi)
    return float(np.array(doc["rho"]) @ v)


def optimal_value(doc):
    S, A, gamma = doc["S"], doc["A"], doc["gamma"]
    p = np.array(doc["kernel"])
    c = np.array(doc["cost"])
    v = np.zeros(S)
    for _ in range(5000):
        v = (c + gamma * np.einsum("sat,t->sa", p, v)).min(axis=1)
    return float(np.array(doc["rho"]) @ v)


def write_mdp(path, cost, kernel, gamma, rho):
    cost = np.asarray(cost, dtype=float)
    doc = {"S": cost.shape[0], "A": cost.shape[1], "gamma": gamma, "rho": list(rho),
           "cost": cost.tolist(), "kernel": np.asarray(kernel).tolist()}
    path.write_text(json.dumps(doc))
    return doc


def test_singleton_cpi_equals_policy_value(tmp_path):
    dump = run("env", "dump", "--env", "gridworld")
    assert dump.returncode == 0
    doc = json.loads(dump.stdout)
    want = value_of(doc, np.full((25, 4), 0.25))
    res = run("evaluate", "--env", "gridworld", "--set", "singleton", "--algo", "cpi", "--out", tmp_path)
    assert res.returncode == 0, res.stderr
    assert float(res.stdout) == pytest.approx(want, abs=1e-12)
    summary = json.loads((tmp_path / "evaluate_cpi_summary.json").read_text())
    assert summary["value"] == pytest.approx(want, abs=1e-12)
    with open(tmp_path / "evaluate_cpi.csv") as f:
        assert f.readline().strip() == "iter,value,gap,step,elapsed_ns"


def test_gridworld_small_radius_cpi_value(tmp_path):
    res = run("evaluate", "--env", "gridworld", "--set", "sa-l2", "--radius", "0.001", "--algo", "cpi",
              "--eps", "1e-2", "--out", tmp_path)
    assert res.returncode == 0, res.stderr
    assert abs(float(res.stdout) - 5.86) <= 0.05 * 5.86


@pytest.mark.xfail(strict=True, reason="the baseline's prescribed step stops after one iteration")
def test_garnet_cpi_and_pgd_agree(tmp_path):
    common = ["--env", "garnet", "--S", "20", "--A", "5", "--seed", "0", "--set", "s-l1", "--radius", "5",
              "--out", tmp_path]
    cpi = run("evaluate", *common, "--algo", "cpi")
    pgd = run("evaluate", *common, "--algo", "pgd")
    assert cpi.returncode == 0 and pgd.returncode == 0
    a, b = float(cpi.stdout), float(pgd.stdout)
    assert abs(a - b) <= 0.025 * max(a, b)


def test_json_trace_format(tmp_path):
    res = run("evaluate", "--env", "gridworld", "--set", "ellipsoid", "--radius", "1", "--algo", "pld",
              "--iters", "5", "--format", "json", "--out", tmp_path)
    assert res.returncode == 0, res.stderr
    doc = json.loads((tmp_path / "evaluate_pld.json").read_text())
    assert len(doc["records"]) >= 5
    assert doc["summary"]["best_value"] == pytest.approx(float(res.stdout))


def test_improve_recovers_optimum_on_singleton(tmp_path):
    kernel = [[[0.9, 0.1], [0.2, 0.8]], [[0.3, 0.7], [0.6, 0.4]]]
    doc = write_mdp(tmp_path / "mdp.json", [[0.0, 1.0], [1.0, 0.1]], kernel, 0.5, [0.5, 0.5])
    res = run("improve", "--env", "file", "--mdp-file", tmp_path / "mdp.json", "--set", "singleton",
              "--critic", "exact", "--K", "300", "--eta", "0.05", "--out", tmp_path)
    assert res.returncode == 0, res.stderr
    assert float(res.stdout) == pytest.approx(optimal_value(doc), abs=1e-2)


def test_improve_single_action_returns_the_only_policy(tmp_path):
    kernel = [[[0.5, 0.5]], [[0.1, 0.9]]]
    write_mdp(tmp_path / "mdp.json", [[1.0], [0.0]], kernel, 0.7, [0.5, 0.5])
    res = run("improve", "--env", "file", "--mdp-file", tmp_path / "mdp.json", "--set", "sa-l2", "--radius",
              "0.1", "--critic", "exact", "--K", "10", "--out", tmp_path)
    assert res.returncode == 0, res.stderr
    pi = json.loads((tmp_path / "improve_policy.json").read_text())["pi"]
    assert pi == [[1.0], [1.0]]


def test_exit_codes(tmp_path):
    assert run("evaluate", "--env", "gridworld", "--out", tmp_path).returncode == 1  # --algo missing
    assert run("nonsense").returncode == 1
    incompatible = run("evaluate", "--env", "gridworld", "--set", "ellipsoid", "--radius", "1", "--algo", "vi",
                       "--out", tmp_path)
    assert incompatible.returncode == 1
    assert "s-rectangular" in incompatible.stderr
    assert run("evaluate", "--env", "gridworld", "--set", "ellipsoid", "--radius", "1", "--algo", "pgd",
               "--out", tmp_path).returncode == 1
    assert run("evaluate", "--env", "gridworld", "--set", "sa-l2", "--radius", "-1", "--algo", "pld",
               "--out", tmp_path).returncode == 3
    (tmp_path / "bad.json").write_text('{"S": 2}')
    assert run("evaluate", "--env", "file", "--mdp-file", tmp_path / "bad.json", "--algo", "pld",
               "--out", tmp_path).returncode == 3
    assert run("preset", "grid_trajectory", "--param", "nosuch=1", "--out", tmp_path).returncode == 1


def test_set_dump_round_trips_through_file(tmp_path):
    dump = run("set", "dump", "--env", "gridworld", "--set", "sa-l2", "--radius", "0.1", "--out", tmp_path)
    assert dump.returncode == 0, dump.stderr
    res = run("evaluate", "--env", "gridworld", "--set", "file", "--set-file", tmp_path / "set.json",
              "--algo", "vi", "--out", tmp_path)
    direct = run("evaluate", "--env", "gridworld", "--set", "sa-l2", "--radius", "0.1", "--algo", "vi",
                 "--out", tmp_path)
    assert res.returncode == 0 and direct.returncode == 0
    assert float(res.stdout) == pytest.approx(float(direct.stdout), abs=1e-12)


def test_manifest_replay_is_byte_identical(tmp_path):
    first, second = tmp_path / "first", tmp_path / "second"
    res = run("preset", "grid_trajectory", "--param", "seeds=2", "--param", "iters=15", "--no-timing",
              "--jobs", "2", "--out", first)
    assert res.returncode == 0, res.stderr
    manifest = json.loads((first / "manifest.json").read_text())
    assert manifest["preset"] == "grid_trajectory" and manifest["failures"] == 0
    assert len(manifest["inputs_sha1"]) == 40
    replay = run("preset", "--manifest", first / "manifest.json", "--out", second)
    assert replay.returncode == 0, replay.stderr
    assert "reproduced 5/5" in replay.stdout
    for entry in manifest["runs"]:
        for out in entry["outputs"]:
            assert filecmp.cmp(first / out["file"], second / out["file"], shallow=False)
    assert filecmp.cmp(first / "trajectory.csv", second / "trajectory.csv", shallow=False)


def test_grid_sweep_preset_schema(tmp_path):
    res = run("preset", "grid_rect_sweep", "--param", "seeds=2", "--param", "radii=[0.01]", "--param",
              "cpi_cap=50", "--out", tmp_path)
    assert res.returncode == 0, res.stderr
    with open(tmp_path / "sweep.csv") as f:
        rows = list(csv.DictReader(f))
    assert list(rows[0].keys()) == ["radius", "algo", "mean_value", "std_value"]
    assert [r["algo"] for r in rows] == ["pld", "cpi"]


def test_mle_coverage_preset(tmp_path):
    res = run("preset", "mle_coverage", "--out", tmp_path)
    assert res.returncode == 0, res.stderr
    with open(tmp_path / "coverage_summary.csv") as f:
        row = next(csv.DictReader(f))
    assert int(row["total"]) == 200
    assert float(row["fraction"]) >= 1 - 0.1 - 0.05


def test_machine_preset_reports_reference_row(tmp_path):
    res = run("preset", "machine_improvement", "--param", "seeds=3", "--out", tmp_path)
    assert res.returncode == 0, res.stderr
    with open(tmp_path / "machine_summary.csv") as f:
        row = next(csv.DictReader(f))
    assert row["reference"] == "6.26 (6.55)"
    assert row["kernel"] == "embedded-calibrated"
    assert 5.9 <= float(row["mean_out_of_sample"]) <= 8.0
