import math

import numpy as np
import pytest

from batchmpc.planner import (
    Candidate,
    EgoState,
    FilterLimits,
    LaneGeometry,
    MetaCostSpec,
    Planner,
    PlannerConfig,
    RankedPlan,
    extract_control,
    filter_candidates,
    meta_cost,
    rank,
    sample_goals_cruise,
    sample_goals_highspeed,
)
from batchmpc.solver import Residuals
from batchmpc.traffic import VehicleState

LANES = LaneGeometry(n_lanes=4, width=4.0)
CRUISE = MetaCostSpec(kind="cruise", v_cruise=15.0)
HS = MetaCostSpec(kind="highspeed", v_max=20.0, y_rl=0.0, w1=1.0, w2=1.0)
EGO = EgoState(x=0.0, y=4.0, vx=15.0)


class TestGoalSampling:
    def test_cruise_round_robin_counts(self):
        goals = sample_goals_cruise(EGO, LANES, CRUISE, 11, 10.0)
        assert all(g.x == pytest.approx(150.0) for g in goals)
        counts = [sum(1 for g in goals if g.lane == k) for k in range(4)]
        assert counts == [3, 3, 3, 2]
        assert all(g.vx == 15.0 and g.vy == 0.0 and g.ax == 0.0 for g in goals)

    def test_cruise_single_lane_colinear(self):
        lanes = LaneGeometry(n_lanes=1, width=4.0)
        goals = sample_goals_cruise(EGO, lanes, CRUISE, 5, 10.0)
        assert len({g.y for g in goals}) == 1

    def test_cruise_zero_speed_degenerate(self):
        spec = MetaCostSpec(kind="cruise", v_cruise=0.0)
        goals = sample_goals_cruise(EGO, LANES, spec, 4, 10.0)
        assert all(g.x == EGO.x for g in goals)

    def test_highspeed_sixty_percent_right(self):
        goals = sample_goals_highspeed(EGO, LANES, HS, 11, 10.0)
        right = [g for g in goals if g.lane == 0]
        assert len(right) == 7  # ceil(0.6 * 11)
        dists = sorted(g.x - EGO.x for g in right)
        assert dists[0] == pytest.approx(0.5 * 200.0)
        assert dists[-1] == pytest.approx(200.0)
        others = [g for g in goals if g.lane != 0]
        assert len(others) == 4
        assert all(g.x - EGO.x == pytest.approx(200.0) for g in others)

    def test_highspeed_two_goals_edge(self):
        goals = sample_goals_highspeed(EGO, LANES, HS, 2, 10.0)
        assert len(goals) == 2
        assert all(g.lane == 0 for g in goals)

    def test_highspeed_requires_two(self):
        with pytest.raises(ValueError):
            sample_goals_highspeed(EGO, LANES, HS, 1, 10.0)

    def test_sampling_is_deterministic(self):
        a = sample_goals_highspeed(EGO, LANES, HS, 11, 10.0)
        b = sample_goals_highspeed(EGO, LANES, HS, 11, 10.0)
        assert [(g.x, g.y) for g in a] == [(g.x, g.y) for g in b]


def make_candidate(n=100, v=15.0, y=0.0, psi=0.0):
    return Candidate(
        x=np.linspace(0, 150, n), y=np.full(n, y), psi=np.full(n, psi),
        psidot=np.zeros(n), v=np.full(n, v), xddot=np.zeros(n), yddot=np.zeros(n),
    )


class TestMetaCost:
    def test_cruise_zero_at_target(self):
        assert meta_cost(make_candidate(v=15.0), CRUISE) == 0.0

    def test_cruise_unit_offset(self):
        assert meta_cost(make_candidate(v=16.0), CRUISE) == pytest.approx(100.0)

    def test_highspeed_arithmetic(self):
        c = make_candidate(v=20.0, y=2.0)
        assert meta_cost(c, HS) == pytest.approx(400.0)

    def test_weight_scaling_preserves_argmin(self):
        cands = [make_candidate(v=18.0, y=1.0), make_candidate(v=19.5, y=3.0)]
        base = [meta_cost(c, HS) for c in cands]
        scaled_spec = MetaCostSpec(kind="highspeed", v_max=20.0, y_rl=0.0, w1=7.0, w2=7.0)
        scaled = [meta_cost(c, scaled_spec) for c in cands]
        assert np.argmin(base) == np.argmin(scaled)
        assert scaled == pytest.approx([7.0 * b for b in base])

    def test_negative_weights_rejected(self):
        with pytest.raises(ValueError):
            MetaCostSpec(kind="highspeed", w1=-1.0)

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            MetaCostSpec(kind="chill")


def make_plan(n=50, l=3, xi=None):
    goals = sample_goals_cruise(EGO, LANES, CRUISE, l, 10.0)
    plan = RankedPlan(
        goals=goals,
        x=np.tile(np.linspace(0, 150, n)[:, None], (1, l)),
        y=np.full((n, l), 4.0),
        psi=np.zeros((n, l)),
        psidot=np.zeros((n, l)),
        v=np.full((n, l), 15.0),
        xddot=np.zeros((n, l)),
        yddot=np.zeros((n, l)),
        residuals=Residuals(
            r_obs=np.zeros(l), r_acc=np.zeros(l), r_nonhol=np.zeros(l)
        ),
    )
    return plan


class TestFilterAndRank:
    def limits(self):
        return FilterLimits(heading_limit=math.radians(13), residual_tol=1e-3, collision_margin=0.01)

    def batch_with_obstacle(self, x_obs, y_obs, n=50):
        from batchmpc.solver import ProblemBatch

        xi_x = np.full(n, x_obs)
        xi_y = np.full(n, y_obs)
        return ProblemBatch(
            l=3, xi_x=xi_x, xi_y=xi_y, a=5.6, b=3.1, v_min=0.1, v_max=20.0, a_max=8.0,
            b_xy=np.zeros((12, 3)), b_psi=np.zeros((4, 3)),
        )

    def test_heading_violation_rejected(self):
        plan = make_plan()
        plan.psi[:, 1] = math.radians(20.0)
        batch = self.batch_with_obstacle(1e4, 1e4)
        feas = filter_candidates(plan, batch, self.limits())
        assert list(feas) == [True, False, True]

    def test_residual_violation_rejected(self):
        plan = make_plan()
        plan.residuals.r_nonhol[2] = 0.5
        batch = self.batch_with_obstacle(1e4, 1e4)
        assert list(filter_candidates(plan, batch, self.limits())) == [True, True, False]

    def test_grazing_obstacle_rejected_by_recomputed_ratio(self):
        plan = make_plan(n=51)  # grid hits x = 75 exactly
        batch = self.batch_with_obstacle(75.0, 4.0 + 0.95 * 3.1, n=51)
        feas = filter_candidates(plan, batch, self.limits())
        assert not feas.any()
        assert plan.min_ratio.min() == pytest.approx(0.95, abs=1e-9)

    def test_clean_plan_accepted(self):
        plan = make_plan()
        batch = self.batch_with_obstacle(1e4, 1e4)
        assert filter_candidates(plan, batch, self.limits()).all()

    def test_rank_single_feasible_wins(self):
        plan = make_plan()
        batch = self.batch_with_obstacle(1e4, 1e4)
        filter_candidates(plan, batch, self.limits())
        plan.feasible[:] = [False, True, False]
        rank(plan, CRUISE)
        assert plan.best_index == 1

    def test_rank_tie_breaks_to_lowest_index(self):
        plan = make_plan()
        batch = self.batch_with_obstacle(1e4, 1e4)
        filter_candidates(plan, batch, self.limits())
        rank(plan, CRUISE)  # all costs equal (identical candidates)
        assert plan.best_index == 0

    def test_rank_none_feasible(self):
        plan = make_plan()
        batch = self.batch_with_obstacle(1e4, 1e4)
        filter_candidates(plan, batch, self.limits())
        plan.feasible[:] = False
        rank(plan, CRUISE)
        assert plan.best_index is None
        with pytest.raises(ValueError):
            plan.best()

    def test_best_cost_is_minimal_among_feasible(self):
        plan = make_plan()
        plan.v[:, 0] = 14.0
        plan.v[:, 2] = 14.5
        batch = self.batch_with_obstacle(1e4, 1e4)
        filter_candidates(plan, batch, self.limits())
        rank(plan, CRUISE)
        assert plan.best_index == 1
        assert plan.meta_cost[1] <= plan.meta_cost.min()


class TestExtractControl:
    def test_zero_heading_rate_zero_steering(self):
        c = make_candidate()
        cmd = extract_control(c, 2.5, 0.101, 0.1)
        assert cmd.steering == 0.0
        assert cmd.accel == pytest.approx(0.0)

    def test_formula_evaluation(self):
        c = make_candidate(v=10.0)
        c.psidot[:] = 0.1
        cmd = extract_control(c, 2.5, 0.101, 0.1)
        assert cmd.steering == pytest.approx(math.atan(0.1 * 2.5 / 10.0))

    def test_constant_speed_zero_accel(self):
        c = make_candidate(v=12.0)
        assert extract_control(c, 2.5, 0.101, 0.1).accel == 0.0

    def test_reads_one_cycle_ahead(self):
        c = make_candidate()
        c.psidot[0] = 0.0
        c.psidot[1] = 0.2
        cmd = extract_control(c, 2.5, 0.101, 0.1)
        assert cmd.steering == pytest.approx(math.atan(0.2 * 2.5 / 15.0))


class TestPlannerCycle:
    def planner(self, meta=CRUISE, max_iter=150):
        cfg = PlannerConfig(max_iter=max_iter)
        return Planner(cfg, LANES, meta)

    def test_empty_road_keeps_lane_with_tiny_cost(self):
        planner = self.planner()
        result = planner.mpc_cycle(EGO, [])
        plan = result.plan
        assert plan.best_index is not None
        assert plan.goals[plan.best_index].lane == 1
        assert plan.meta_cost[plan.best_index] <= 1e-2
        assert not result.fallback

    def test_selected_cost_minimal_among_feasible(self):
        planner = self.planner()
        result = planner.mpc_cycle(EGO, [])
        plan = result.plan
        feasible_costs = plan.meta_cost[plan.feasible]
        assert plan.meta_cost[plan.best_index] == feasible_costs.min()

    def test_kkt_factorized_once_across_cycles(self):
        planner = self.planner()
        for _ in range(3):
            planner.mpc_cycle(EGO, [])
        assert planner.solver.kkt.n_factorizations == 2

    def test_fallback_on_adversarial_wall(self):
        planner = self.planner(max_iter=30)
        # a wall of stopped traffic across every lane right ahead
        wall = [
            VehicleState(id=i, x=14.0, y=float(LANES.centers[i]), vx=0.0, vy=0.0, lane=i)
            for i in range(4)
        ]
        result = planner.mpc_cycle(EgoState(x=0.0, y=4.0, vx=15.0), wall)
        assert result.fallback
        assert result.plan.best_index is None
        expected = max(-planner.cfg.a_max, (planner.cfg.v_min - 15.0) / planner.cfg.t_f)
        assert result.command.accel == pytest.approx(expected)

    def test_slow_lead_prefers_lane_change(self):
        from tests.conftest import config_path
        from batchmpc import harness

        cfg = harness.load_config(config_path("slow_lead.toml"))
        planner = Planner(cfg.planner_config, cfg.lane_geometry, cfg.meta_spec)
        world = harness.build_traffic(cfg, np.random.default_rng(cfg.seed))
        result = planner.mpc_cycle(EgoState(x=0.0, y=4.0, vx=15.0), world.states())
        plan = result.plan
        assert plan.best_index is not None
        best_lane = plan.goals[plan.best_index].lane
        assert best_lane != 1  # overtaking beats following the 9 m/s lead
        lane_keep = [i for i, g in enumerate(plan.goals) if g.lane == 1]
        assert plan.meta_cost[plan.best_index] < min(plan.meta_cost[i] for i in lane_keep)
