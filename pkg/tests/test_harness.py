import json
import subprocess
import sys

import numpy as np
import pytest

from batchmpc import harness
from batchmpc.harness import ConfigError, RunLog, Stat, load_config, read_log, summarize, write_log
from tests.conftest import REPO, config_path


@pytest.fixture(scope="module")
def short_cruise():
    cfg = load_config(config_path("cruise_idm.toml"))
    cfg.duration = 2.0
    return cfg


@pytest.fixture(scope="module")
def short_log(short_cruise):
    return harness.run_scenario(short_cruise)


class TestConfig:
    def test_load_canonical(self):
        cfg = load_config(config_path("cruise_idm.toml"))
        assert cfg.kind == "cruise"
        assert cfg.l == 11 and cfg.n == 100 and cfg.m == 10
        assert cfg.a == 5.6 and cfg.b == 3.1
        assert len(cfg.vehicles) == 10

    def test_missing_file(self):
        with pytest.raises(ConfigError):
            load_config("nonexistent.toml")

    def test_seed_is_mandatory(self, tmp_path):
        path = tmp_path / "x.toml"
        path.write_text("[scenario]\nkind = 'cruise'\n")
        with pytest.raises(ConfigError, match="seed"):
            load_config(path)

    def test_bad_kind_rejected(self, tmp_path):
        path = tmp_path / "x.toml"
        path.write_text("[scenario]\nkind = 'drift'\nseed = 1\n")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_vehicle_off_road_rejected(self, tmp_path):
        path = tmp_path / "x.toml"
        path.write_text(
            "[scenario]\nseed = 1\n[[traffic.vehicle]]\nlane = 9\nx = 1.0\nv = 1.0\n"
        )
        with pytest.raises(ConfigError):
            load_config(path)

    def test_trace_path_resolution(self, tmp_path):
        cfg = load_config(config_path("cruise_trace.toml"))
        world = harness.build_traffic(cfg, np.random.default_rng(0))
        assert len(world.states()) >= 10

    def test_missing_trace_rejected(self, tmp_path):
        path = tmp_path / "x.toml"
        path.write_text("[scenario]\nseed = 1\n[traffic]\nsource = 'trace:nope.csv'\n")
        with pytest.raises(ConfigError):
            load_config(path)
        # malformed source string
        path.write_text("[scenario]\nseed = 1\n[traffic]\nsource = 'teleport'\n")
        with pytest.raises(ConfigError):
            load_config(path)


class TestRunDeterminism:
    def test_same_seed_byte_identical_logs(self, short_cruise, tmp_path):
        log_a = harness.run_scenario(short_cruise)
        log_b = harness.run_scenario(short_cruise)
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        write_log(log_a, out_a)
        write_log(log_b, out_b)
        assert (out_a / "run.jsonl").read_bytes() == (out_b / "run.jsonl").read_bytes()

    def test_seed_changes_random_traffic(self, tmp_path):
        base = load_config(config_path("cruise_idm.toml"))
        cfg_text = f"""
[scenario]
kind = "cruise"
duration = 1.0
seed = 1
[traffic]
n_random = 6
[solver]
max_iter = 30
"""
        path = tmp_path / "r.toml"
        path.write_text(cfg_text)
        cfg1 = load_config(path)
        path.write_text(cfg_text.replace("seed = 1", "seed = 2"))
        cfg2 = load_config(path)
        w1 = harness.build_traffic(cfg1, np.random.default_rng(cfg1.seed))
        w2 = harness.build_traffic(cfg2, np.random.default_rng(cfg2.seed))
        xs1 = [v.x for v in w1.states()]
        xs2 = [v.x for v in w2.states()]
        assert xs1 != xs2

    def test_log_roundtrip(self, short_log, tmp_path):
        write_log(short_log, tmp_path)
        loaded = read_log(tmp_path / "run.jsonl")
        assert loaded.meta["seed"] == short_log.meta["seed"]
        assert len(loaded.records) == len(short_log.records)
        assert loaded.solve_times == pytest.approx(short_log.solve_times, abs=1e-6)


class TestSummarize:
    def test_pure_function_of_log(self, short_log, tmp_path):
        write_log(short_log, tmp_path)
        stored = json.loads((tmp_path / "summary.json").read_text())
        recomputed = summarize(read_log(tmp_path / "run.jsonl")).to_dict()
        for key in ("meta_cost", "velocity", "lat_dist", "collision_count", "cycles"):
            assert stored[key] == recomputed[key]

    def test_constant_velocity_log_zero_accels(self):
        meta = {
            "kind": "cruise", "dt": 0.1, "v_cruise": 15.0, "v_max": 20.0,
            "w1": 1.0, "w2": 0.1, "y_rl": 0.0, "ellipse": {"a": 5.6, "b": 3.1},
        }
        records = [
            {
                "ego": {"x": 15.0 * k * 0.1, "y": 4.0, "vx": 15.0, "vy": 0.0, "psidot": 0.0},
                "obstacles": [], "fallback": False,
            }
            for k in range(20)
        ]
        s = summarize(RunLog(meta=meta, records=records, solve_times=[]))
        assert s.lin_acc.mean == 0.0 and s.lin_acc.max == 0.0
        assert s.ang_acc.max == 0.0
        assert s.velocity.mean == pytest.approx(15.0)
        assert s.meta_cost.max == 0.0
        assert s.collision_count == 0

    def test_hand_computed_stats(self):
        meta = {
            "kind": "cruise", "dt": 1.0, "v_cruise": 10.0, "v_max": 20.0,
            "w1": 1.0, "w2": 0.1, "y_rl": 0.0, "ellipse": {"a": 5.6, "b": 3.1},
        }
        speeds = [10.0, 12.0, 9.0]
        records = [
            {"ego": {"x": 0.0, "y": 1.0, "vx": v, "vy": 0.0, "psidot": 0.0},
             "obstacles": [], "fallback": False}
            for v in speeds
        ]
        s = summarize(RunLog(meta=meta, records=records, solve_times=[0.1, 0.2, 0.3]))
        assert s.meta_cost.mean == pytest.approx(np.mean([0.0, 4.0, 1.0]))
        assert s.lin_acc.max == pytest.approx(3.0)
        assert s.velocity.min == 9.0
        assert s.lat_dist.mean == 1.0
        assert s.solve_time.mean == pytest.approx(0.2)

    def test_collision_detected_from_raw_positions(self):
        meta = {
            "kind": "cruise", "dt": 0.1, "v_cruise": 15.0, "v_max": 20.0,
            "w1": 1.0, "w2": 0.1, "y_rl": 0.0, "ellipse": {"a": 5.6, "b": 3.1},
        }
        records = [
            {"ego": {"x": 0.0, "y": 0.0, "vx": 15.0, "vy": 0.0, "psidot": 0.0},
             "obstacles": [{"x": 3.0, "y": 0.0}], "fallback": False},
            {"ego": {"x": 1.0, "y": 0.0, "vx": 15.0, "vy": 0.0, "psidot": 0.0},
             "obstacles": [{"x": 50.0, "y": 0.0}], "fallback": False},
        ]
        log = RunLog(meta=meta, records=records, solve_times=[])
        assert harness.collision_count(log) == 1
        assert harness.min_logged_ratio(log) == pytest.approx(3.0 / 5.6)

    def test_empty_log_rejected(self):
        with pytest.raises(ValueError):
            summarize(RunLog(meta={}, records=[], solve_times=[]))

    def test_stat_of_empty(self):
        s = Stat.of([])
        assert np.isnan(s.mean)


class TestAbort:
    def test_solver_failure_carries_partial_log(self, short_cruise, monkeypatch):
        from batchmpc.planner import Planner

        calls = {"n": 0}
        original = Planner.mpc_cycle

        def flaky(self, ego, vehicles):
            if calls["n"] >= 3:
                raise RuntimeError("injected solver failure")
            calls["n"] += 1
            return original(self, ego, vehicles)

        monkeypatch.setattr(Planner, "mpc_cycle", flaky)
        with pytest.raises(harness.ScenarioAborted) as excinfo:
            harness.run_scenario(short_cruise)
        assert len(excinfo.value.log.records) == 3


class TestEmptyRoad:
    def test_empty_road_cruise_run(self, tmp_path):
        """Free road: no collisions and near-zero velocity residual."""
        cfg = load_config(config_path("cruise_idm.toml"))
        cfg.vehicles = []
        cfg.duration = 15.0
        log = harness.run_scenario(cfg)
        s = summarize(log)
        assert s.collision_count == 0
        assert s.fallback_count == 0
        assert s.meta_cost.mean <= 1e-2


class TestBenchBatch:
    def test_rows_and_csv(self, short_cruise, tmp_path):
        rows = harness.bench_batch(short_cruise, [4, 11], cycles=3)
        assert [row["l"] for row in rows] == [4, 11]
        assert all(row["mean"] > 0 for row in rows)
        # solve time grows (or at worst holds) with batch size
        assert rows[1]["mean"] >= 0.9 * rows[0]["mean"]
        path = tmp_path / "timing.csv"
        harness.write_timing_csv(rows, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "l,n_solves,mean,min,max"
        assert len(lines) == 3


def run_cli(*args, cwd=REPO):
    return subprocess.run(
        [sys.executable, "-m", "batchmpc.cli", *args],
        capture_output=True, text=True, cwd=cwd,
        env={"PYTHONPATH": str(REPO / "src"), "PATH": "/usr/bin:/bin"},
    )


class TestCli:
    def test_run_writes_outputs(self, tmp_path):
        cfg = tmp_path / "tiny.toml"
        base = (REPO / "configs" / "cruise_idm.toml").read_text()
        cfg.write_text(base.replace("duration = 60.0", "duration = 0.5"))
        out = tmp_path / "out"
        res = run_cli("run", str(cfg), "--out", str(out))
        assert res.returncode == 0, res.stderr
        assert (out / "run.jsonl").exists()
        assert (out / "times.csv").exists()
        assert (out / "summary.json").exists()

    def test_run_seed_override_changes_meta(self, tmp_path):
        cfg = tmp_path / "tiny.toml"
        base = (REPO / "configs" / "cruise_idm.toml").read_text()
        cfg.write_text(base.replace("duration = 60.0", "duration = 0.3"))
        out = tmp_path / "out"
        res = run_cli("run", str(cfg), "--out", str(out), "--seed", "99")
        assert res.returncode == 0, res.stderr
        meta = json.loads((out / "run.jsonl").read_text().splitlines()[0])
        assert meta["seed"] == 99

    def test_config_error_exit_code_1(self, tmp_path):
        res = run_cli("run", str(tmp_path / "missing.toml"))
        assert res.returncode == 1

    def test_oracle_suite_passes(self):
        res = run_cli("oracle", "kkt")
        assert res.returncode == 0, res.stdout + res.stderr
        assert "PASS" in res.stdout

    def test_summarize_roundtrip(self, tmp_path, short_log):
        write_log(short_log, tmp_path)
        res = run_cli("summarize", str(tmp_path / "run.jsonl"))
        assert res.returncode == 0, res.stderr
        parsed = json.loads(res.stdout)
        assert parsed["cycles"] == len(short_log.records)

    def test_summarize_missing_file_exit_1(self):
        res = run_cli("summarize", "no-such-log.jsonl")
        assert res.returncode == 1

    def test_bench_batch_writes_csv(self, tmp_path):
        out = tmp_path / "bench"
        res = run_cli(
            "bench-batch", str(REPO / "configs" / "cruise_idm.toml"),
            "--sizes", "4,8", "--cycles", "2", "--out", str(out),
        )
        assert res.returncode == 0, res.stderr
        lines = (out / "timing.csv").read_text().strip().splitlines()
        assert len(lines) == 3

    def test_bench_batch_bad_sizes_exit_1(self):
        res = run_cli(
            "bench-batch", str(REPO / "configs" / "cruise_idm.toml"), "--sizes", "a,b"
        )
        assert res.returncode == 1
