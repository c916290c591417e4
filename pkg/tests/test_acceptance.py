"""Acceptance suite: one test per release criterion, one PASS line each.

Run with ``pytest tests/test_acceptance.py -v -s``. The closed-loop scenario
runs dominate the wall time (each shipped scenario is simulated in full once
and shared across criteria).
"""

import time

import numpy as np
import pytest

from batchmpc import harness, oracles
from batchmpc.planner import EgoState, Planner
from tests.conftest import config_path

SCENARIOS = ("cruise_idm", "highspeed_idm", "cruise_trace", "roadblock", "slow_lead")


def report(name: str, ok: bool, detail: str):
    print(f"\n{'PASS' if ok else 'FAIL'}: {name} ({detail})")
    assert ok, f"{name}: {detail}"


@pytest.fixture(scope="module")
def scenario_runs():
    """One full closed-loop run per shipped scenario, shared by criteria."""
    runs = {}
    for name in SCENARIOS:
        cfg = harness.load_config(config_path(f"{name}.toml"))
        runs[name] = (cfg, harness.run_scenario(cfg))
    return runs


class TestAcceptance:
    def test_convergence_on_canonical_dense_scenario(self):
        """Best candidate residual <= 1e-3 within 150 iterations, <= 10 s."""
        cfg = harness.load_config(config_path("cruise_idm.toml"))
        planner = Planner(cfg.planner_config, cfg.lane_geometry, cfg.meta_spec)
        lanes = cfg.lane_geometry
        world = harness.build_traffic(cfg, np.random.default_rng(cfg.seed))
        ego = EgoState(x=cfg.ego_x, y=float(lanes.centers[cfg.ego_lane]), vx=cfg.ego_v)
        goals = __import__("batchmpc.planner", fromlist=["sample_goals"]).sample_goals(
            ego, lanes, cfg.meta_spec, cfg.l, cfg.t_f
        )
        batch = planner.build_batch(ego, world.states(), goals)
        start = time.perf_counter()
        _, info = planner.solver.solve(batch, max_iter=150, tol=0.0)
        elapsed = time.perf_counter() - start
        final = info.residual_history[-1]
        best = float(final.max_per_instance().min())
        report(
            "convergence (canonical dense, 150 iters)",
            best <= 1e-3 and elapsed <= 10.0,
            f"best residual {best:.2e} <= 1e-3, check ran in {elapsed:.2f}s <= 10s",
        )

    def test_batch_equals_sequential_solves(self):
        rep = oracles.oracle_batch_vs_sequential(l=11, iters=60, seed=7)
        report("batch vs sequential oracle", rep.ok, rep.line())

    def test_kkt_oracle(self):
        reps = oracles.oracle_kkt(cases=50)
        ok = all(r.ok for r in reps)
        report("KKT oracle (Eq residual + dense-QP match)", ok, "; ".join(r.line() for r in reps))

    def test_closed_form_subproblem_oracles(self):
        reps = oracles.SUITES["closed_forms"]()
        ok = all(r.ok for r in reps)
        report("closed-form grid-search oracles", ok, "; ".join(r.line() for r in reps))

    def test_safety_across_shipped_scenarios(self, scenario_runs):
        worst_name, worst_ratio, collisions = None, np.inf, 0
        for name, (cfg, log) in scenario_runs.items():
            ratio = harness.min_logged_ratio(log)
            collisions += harness.collision_count(log)
            if ratio < worst_ratio:
                worst_name, worst_ratio = name, ratio
            assert cfg.duration >= 60.0, f"{name} runs shorter than 60 s"
        report(
            "safety (all shipped scenarios, >= 60 s each)",
            worst_ratio >= 0.99 and collisions == 0,
            f"min ellipse ratio {worst_ratio:.3f} (in {worst_name}) >= 0.99, collisions {collisions}",
        )

    def test_cruise_meta_cost(self, scenario_runs):
        _, log = scenario_runs["cruise_idm"]
        summary = harness.summarize(log)
        report(
            "cruise meta-cost (mean <= 0.5, max <= 5.0)",
            summary.meta_cost.mean <= 0.5 and summary.meta_cost.max <= 5.0,
            f"mean {summary.meta_cost.mean:.4f}, max {summary.meta_cost.max:.4f}",
        )

    def test_batch_scaling(self):
        cfg = harness.load_config(config_path("cruise_idm.toml"))
        rows = harness.bench_batch(cfg, [11, 44], cycles=20)
        mean11 = rows[0]["mean"]
        mean44 = rows[1]["mean"]
        ratio = mean44 / mean11
        report(
            "batch scaling (l=44 <= 5x l=11)",
            ratio <= 5.0,
            f"mean {mean11*1e3:.1f} ms at l=11 vs {mean44*1e3:.1f} ms at l=44, ratio {ratio:.2f}",
        )

    def test_factorization_count_independent_of_batch_size(self):
        cfg = harness.load_config(config_path("cruise_idm.toml"))
        counts = {}
        for l in (11, 44):
            pc = cfg.planner_config
            import dataclasses

            pc = dataclasses.replace(pc, l=l)
            planner = Planner(pc, cfg.lane_geometry, cfg.meta_spec)
            lanes = cfg.lane_geometry
            world = harness.build_traffic(cfg, np.random.default_rng(cfg.seed))
            ego = EgoState(x=0.0, y=float(lanes.centers[cfg.ego_lane]), vx=cfg.ego_v)
            for _ in range(3):
                planner.mpc_cycle(ego, world.states())
            counts[l] = planner.solver.kkt.n_factorizations
        report(
            "factorization reuse (2 per problem shape, any l)",
            counts[11] == 2 and counts[44] == 2,
            f"factorizations: l=11 -> {counts[11]}, l=44 -> {counts[44]}",
        )

    def test_cycle_latency(self, scenario_runs):
        _, log = scenario_runs["cruise_idm"]
        mean = float(np.mean(log.solve_times))
        report(
            "cycle latency (mean solve <= 0.2 s, l=11, n=100, m=10)",
            mean <= 0.2,
            f"mean {mean*1e3:.1f} ms over {len(log.solve_times)} cycles",
        )

    def test_multimodality_overtaking(self, scenario_runs):
        """Selected candidate's mean speed exceeds the lane-keeping one's in
        the rolling-roadblock scene, and the closed loop keeps cruising."""
        cfg, log = scenario_runs["roadblock"]
        planner = Planner(cfg.planner_config, cfg.lane_geometry, cfg.meta_spec)
        world = harness.build_traffic(cfg, np.random.default_rng(cfg.seed))
        lanes = cfg.lane_geometry
        ego = EgoState(x=cfg.ego_x, y=float(lanes.centers[cfg.ego_lane]), vx=cfg.ego_v)
        result = planner.mpc_cycle(ego, world.states())
        plan = result.plan
        assert plan.best_index is not None, "no candidate selected in roadblock scene"
        selected_speed = float(plan.v[:, plan.best_index].mean())
        keep = [i for i, g in enumerate(plan.goals) if g.lane == cfg.ego_lane]
        keep_speed = max(float(plan.v[:, i].mean()) for i in keep)
        ego_mean_speed = harness.summarize(log).velocity.mean
        ok = (
            selected_speed > keep_speed
            and plan.goals[plan.best_index].lane != cfg.ego_lane
            and ego_mean_speed >= 14.0
        )
        report(
            "multi-modality (overtaking via ranking)",
            ok,
            f"selected lane {plan.goals[plan.best_index].lane} mean speed {selected_speed:.3f} "
            f"> lane-keeping {keep_speed:.3f}; closed-loop mean {ego_mean_speed:.2f} m/s",
        )
