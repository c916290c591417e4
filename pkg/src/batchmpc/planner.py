"""Receding-horizon planner: goal sampling, batch solve, ranking, control.

Each cycle samples one goal per batch instance, solves the whole batch at
once, drops candidates that violate the heading limit, residual tolerance or
recomputed collision margin, and picks the cheapest survivor under the
meta-cost. The collision check is recomputed from sampled positions, never
from the solver's auxiliary variables, so it does not depend on the solver
having converged.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .basis import BoundarySpec, build_basis, build_constant_matrices, build_time_grid
from .solver import AmState, BatchSolver, ProblemBatch, Residuals, SolveInfo
from .traffic import VehicleState, predict_constant_velocity, select_nearest


@dataclass
class EgoState:
    """Ego pose and derivatives in the road-aligned frame."""

    x: float
    y: float
    psi: float = 0.0
    psidot: float = 0.0
    vx: float = 0.0
    vy: float = 0.0
    ax: float = 0.0
    ay: float = 0.0

    @property
    def speed(self) -> float:
        return math.hypot(self.vx, self.vy)


@dataclass(frozen=True)
class LaneGeometry:
    """Straight road with equally spaced lanes; lane 0 is the right lane."""

    n_lanes: int
    width: float
    y0: float = 0.0

    def __post_init__(self):
        if self.n_lanes < 1 or self.width <= 0:
            raise ValueError("need at least one lane of positive width")

    @property
    def centers(self) -> np.ndarray:
        return self.y0 + self.width * np.arange(self.n_lanes)

    @property
    def y_right(self) -> float:
        return self.y0

    def lane_of(self, y: float) -> int:
        return int(np.argmin(np.abs(self.centers - y)))


@dataclass
class Goal:
    x: float
    y: float
    vx: float
    vy: float
    ax: float
    ay: float
    lane: int


@dataclass(frozen=True)
class MetaCostSpec:
    """Task-level scoring of candidate trajectories."""

    kind: str  # "cruise" | "highspeed"
    v_cruise: float = 15.0
    v_max: float = 20.0
    y_rl: float = 0.0
    w1: float = 1.0
    w2: float = 1.0

    def __post_init__(self):
        if self.kind not in ("cruise", "highspeed"):
            raise ValueError(f"unknown meta-cost kind {self.kind!r}")
        if self.w1 < 0 or self.w2 < 0:
            raise ValueError("meta-cost weights must be nonnegative")


def sample_goals_cruise(
    ego: EgoState, lanes: LaneGeometry, spec: MetaCostSpec, l: int, t_f: float
) -> list[Goal]:
    """Round-robin goals over the lanes, all at the cruise distance."""
    centers = lanes.centers
    goals = []
    for i in range(l):
        lane = i % lanes.n_lanes
        goals.append(
            Goal(
                x=ego.x + spec.v_cruise * t_f, y=float(centers[lane]),
                vx=spec.v_cruise, vy=0.0, ax=0.0, ay=0.0, lane=lane,
            )
        )
    return goals


def sample_goals_highspeed(
    ego: EgoState, lanes: LaneGeometry, spec: MetaCostSpec, l: int, t_f: float
) -> list[Goal]:
    """~60% of the goals staggered on the right lane, the rest spread wide."""
    if l < 2:
        raise ValueError("high-speed sampling needs at least 2 goals")
    n_right = math.ceil(0.6 * l)
    centers = lanes.centers
    reach = spec.v_max * t_f
    goals = [
        Goal(
            x=ego.x + dist, y=float(centers[0]),
            vx=spec.v_max, vy=0.0, ax=0.0, ay=0.0, lane=0,
        )
        for dist in np.linspace(0.5 * reach, reach, n_right)
    ]
    other_lanes = list(range(1, lanes.n_lanes)) or [0]
    for i in range(l - n_right):
        lane = other_lanes[i % len(other_lanes)]
        goals.append(
            Goal(
                x=ego.x + reach, y=float(centers[lane]),
                vx=spec.v_max, vy=0.0, ax=0.0, ay=0.0, lane=lane,
            )
        )
    return goals


def sample_goals(
    ego: EgoState, lanes: LaneGeometry, spec: MetaCostSpec, l: int, t_f: float
) -> list[Goal]:
    if spec.kind == "cruise":
        return sample_goals_cruise(ego, lanes, spec, l, t_f)
    return sample_goals_highspeed(ego, lanes, spec, l, t_f)


@dataclass
class Candidate:
    """One sampled candidate trajectory."""

    x: np.ndarray
    y: np.ndarray
    psi: np.ndarray
    psidot: np.ndarray
    v: np.ndarray
    xddot: np.ndarray
    yddot: np.ndarray


@dataclass
class RankedPlan:
    """Batch solve output: sampled candidates, filters, costs, selection."""

    goals: list[Goal]
    x: np.ndarray
    y: np.ndarray
    psi: np.ndarray
    psidot: np.ndarray
    v: np.ndarray
    xddot: np.ndarray
    yddot: np.ndarray
    residuals: Residuals
    min_ratio: np.ndarray = field(default=None)
    heading_max: np.ndarray = field(default=None)
    feasible: np.ndarray = field(default=None)
    meta_cost: np.ndarray = field(default=None)
    best_index: int | None = None

    @property
    def l(self) -> int:
        return self.x.shape[1]

    def candidate(self, i: int) -> Candidate:
        return Candidate(
            x=self.x[:, i], y=self.y[:, i], psi=self.psi[:, i], psidot=self.psidot[:, i],
            v=self.v[:, i], xddot=self.xddot[:, i], yddot=self.yddot[:, i],
        )

    def best(self) -> Candidate:
        if self.best_index is None:
            raise ValueError("no feasible candidate was selected")
        return self.candidate(self.best_index)


@dataclass(frozen=True)
class FilterLimits:
    heading_limit: float = math.radians(13.0)
    residual_tol: float = 1e-3
    collision_margin: float = 0.01


@dataclass
class ControlCommand:
    accel: float
    steering: float


def meta_cost(traj: Candidate, spec: MetaCostSpec) -> float:
    """Sum of the instantaneous task cost over the grid samples."""
    if spec.kind == "cruise":
        return float(np.sum((traj.v - spec.v_cruise) ** 2))
    return float(
        np.sum(spec.w1 * (traj.v - spec.v_max) ** 2 + spec.w2 * (traj.y - spec.y_rl) ** 2)
    )


def collision_ratios(
    x: np.ndarray, y: np.ndarray, xi_x: np.ndarray, xi_y: np.ndarray, a: float, b: float
) -> np.ndarray:
    """Ellipse separation ratios recomputed from positions, (m*n, l).

    Ratio 1 is the collision boundary; values below 1 mean overlap.
    """
    n = x.shape[0]
    m = xi_x.shape[0] // n if n else 0
    wx = (np.tile(x, (m, 1)) - xi_x[:, None]) / a
    wy = (np.tile(y, (m, 1)) - xi_y[:, None]) / b
    return np.sqrt(wx * wx + wy * wy)


def filter_candidates(plan: RankedPlan, batch: ProblemBatch, limits: FilterLimits) -> np.ndarray:
    """Mark candidates violating heading, residual or collision limits."""
    plan.heading_max = np.abs(plan.psi).max(axis=0)
    ratios = collision_ratios(plan.x, plan.y, batch.xi_x, batch.xi_y, batch.a, batch.b)
    plan.min_ratio = (
        ratios.min(axis=0) if ratios.size else np.full(plan.l, np.inf)
    )
    plan.feasible = (
        (plan.heading_max <= limits.heading_limit)
        & (plan.residuals.max_per_instance() <= limits.residual_tol)
        & (plan.min_ratio >= 1.0 - limits.collision_margin)
    )
    return plan.feasible


def rank(plan: RankedPlan, spec: MetaCostSpec) -> RankedPlan:
    """Score every candidate; select the cheapest feasible one (lowest index
    wins ties). ``best_index`` stays None when nothing is feasible."""
    plan.meta_cost = np.array([meta_cost(plan.candidate(i), spec) for i in range(plan.l)])
    if plan.feasible is None or not plan.feasible.any():
        plan.best_index = None
    else:
        costs = np.where(plan.feasible, plan.meta_cost, np.inf)
        plan.best_index = int(np.argmin(costs))
    return plan


def extract_control(
    traj: Candidate, h: float, dt_grid: float, dt_ctrl: float | None = None
) -> ControlCommand:
    """Finite-difference accel and bicycle steering for the next cycle.

    Controls are read at the first grid sample at least one control period
    ahead: the boundary constraints pin the very first sample's heading rate
    to the current ego state, so reading there would only echo the input back
    and the vehicle would never initiate a maneuver.
    """
    k = 1 if dt_ctrl is None else max(1, int(round(dt_ctrl / dt_grid)))
    k = min(k, len(traj.v) - 1)
    accel = (traj.v[k] - traj.v[k - 1]) / dt_grid
    steering = math.atan(traj.psidot[k] * h / max(traj.v[k], 1e-6))
    return ControlCommand(accel=accel, steering=steering)


@dataclass(frozen=True)
class PlannerConfig:
    l: int = 11
    n: int = 100
    t_f: float = 10.0
    degree: int = 10
    rho_xy: float = 1.0
    max_iter: int = 100
    tol: float = 1e-3
    m: int = 10
    a: float = 5.6
    b: float = 3.1
    v_min: float = 0.1
    v_max: float = 20.0
    a_max: float = 8.0
    h: float = 2.5
    dt_cycle: float = 0.1
    warm_start: bool = True
    warm_residual_cap: float = 0.2
    limits: FilterLimits = FilterLimits()


@dataclass
class CycleResult:
    command: ControlCommand
    plan: RankedPlan
    solve_time: float
    info: SolveInfo
    fallback: bool


class Planner:
    """Owns the shared matrices and runs one MPC cycle at a time.

    The basis, constant matrices and KKT factorizations are built once here
    and reused for every cycle; per-cycle work is boundary/prediction
    assembly plus the batch solve.
    """

    def __init__(self, cfg: PlannerConfig, lanes: LaneGeometry, meta: MetaCostSpec):
        self.cfg = cfg
        self.lanes = lanes
        self.meta = meta
        grid = build_time_grid(0.0, cfg.t_f, cfg.n)
        self.basis = build_basis(grid, cfg.degree)
        self.mats = build_constant_matrices(self.basis, cfg.m, BoundarySpec())
        self.solver = BatchSolver(self.basis, self.mats, cfg.rho_xy)
        self._prev_state: tuple[AmState, Residuals] | None = None
        self._prev_steering = 0.0
        # Time-shift operator in coefficient space: a shifted polynomial stays
        # a polynomial of the same degree, so evaluating the basis slightly
        # past u = 1 (its natural continuation) and projecting back gives an
        # exact warm-start map c -> shift(c), not an approximation.
        span = grid.tf - grid.t0
        u = (grid.times + cfg.dt_cycle - grid.t0) / span
        from .basis import _bernstein_rows

        self._shift_map = np.linalg.pinv(self.basis.P) @ _bernstein_rows(u, cfg.degree)

    def boundary_vectors(self, ego: EgoState, goals: list[Goal]) -> tuple[np.ndarray, np.ndarray]:
        """Per-instance boundary right-hand sides from ego state and goals."""
        l = len(goals)
        b_xy = np.empty((12, l))
        b_psi = np.empty((4, l))
        for i, g in enumerate(goals):
            b_xy[:, i] = [
                ego.x, ego.vx, ego.ax, g.x, g.vx, g.ax,
                ego.y, ego.vy, ego.ay, g.y, g.vy, g.ay,
            ]
            b_psi[:, i] = [ego.psi, ego.psidot, 0.0, 0.0]
        return b_xy, b_psi

    def build_batch(
        self, ego: EgoState, vehicles: list[VehicleState], goals: list[Goal]
    ) -> ProblemBatch:
        nearest = select_nearest(vehicles, ego.x, ego.y, self.cfg.m)
        xi_x, xi_y = predict_constant_velocity(nearest, self.basis.grid.times)
        b_xy, b_psi = self.boundary_vectors(ego, goals)
        return ProblemBatch(
            l=len(goals), xi_x=xi_x, xi_y=xi_y,
            a=self.cfg.a, b=self.cfg.b,
            v_min=self.cfg.v_min, v_max=self.cfg.v_max, a_max=self.cfg.a_max,
            b_xy=b_xy, b_psi=b_psi, rho_xy=self.cfg.rho_xy,
        )

    def _warm_state(self, batch: ProblemBatch) -> AmState | None:
        """Cold state with near-converged previous instances shifted one cycle.

        Goal sampling is deterministic, so instance i keeps chasing the same
        lane across cycles; every instance whose previous residual was within
         10x the tolerance is warm-started from its own time-shifted solution.
        The multipliers are carried over (not reset): they encode the
        converged force balance against the nearly identical shifted problem,
        and without them a warm instance re-converges no faster than a cold
        start, which starves the closed loop whenever the selected maneuver
        needs most of the iteration budget. Diverged instances restart cold
        so stale multipliers never accumulate across cycles.
        """
        if self._prev_state is None:
            return None
        prev, prev_res = self._prev_state
        if prev.c_x.shape[1] != batch.l:
            return None
        # Instances still descending keep refining across cycles (the shift
        # map is exact, so successive solves effectively continue the same
        # iteration). Clearly diverged instances (blocked goals sit at
        # residual ~1+) restart cold so stale multipliers never accumulate.
        eligible = prev_res.max_per_instance() <= self.cfg.warm_residual_cap
        if not eligible.any():
            return None
        idx = np.where(eligible)[0]
        state = self.solver.init_state(batch)
        cx_s = self._shift_map @ prev.c_x[:, idx]
        cy_s = self._shift_map @ prev.c_y[:, idx]
        cp_s = self._shift_map @ prev.c_psi[:, idx]
        state.c_x[:, idx] = cx_s
        state.c_y[:, idx] = cy_s
        state.c_psi[:, idx] = cp_s
        x = self.basis.P @ cx_s
        y = self.basis.P @ cy_s
        xdot = self.basis.Pdot @ cx_s
        ydot = self.basis.Pdot @ cy_s
        xddot = self.basis.Pddot @ cx_s
        yddot = self.basis.Pddot @ cy_s
        state.v[:, idx] = np.clip(np.sqrt(xdot**2 + ydot**2), batch.v_min, batch.v_max)
        alpha, d = kernels.obstacle_update(x, y, batch.xi_x, batch.xi_y, batch.a, batch.b)
        state.alpha[:, idx] = alpha
        state.d[:, idx] = d
        state.alpha_a[:, idx] = np.arctan2(yddot, xddot)
        state.d_a[:, idx] = np.minimum(np.sqrt(xddot**2 + yddot**2), batch.a_max)
        state.lambda_x[:, idx] = prev.lambda_x[:, idx]
        state.lambda_y[:, idx] = prev.lambda_y[:, idx]
        state.lambda_psi[:, idx] = prev.lambda_psi[:, idx]
        return state

    def sample_plan(self, state: AmState, goals: list[Goal], residuals: Residuals) -> RankedPlan:
        P, Pdot, Pddot = self.basis.P, self.basis.Pdot, self.basis.Pddot
        xdot = Pdot @ state.c_x
        ydot = Pdot @ state.c_y
        return RankedPlan(
            goals=goals,
            x=P @ state.c_x, y=P @ state.c_y,
            psi=P @ state.c_psi, psidot=Pdot @ state.c_psi,
            v=np.sqrt(xdot**2 + ydot**2),
            xddot=Pddot @ state.c_x, yddot=Pddot @ state.c_y,
            residuals=residuals,
        )

    def fallback_command(self, ego: EgoState) -> ControlCommand:
        """Graceful degradation: hold steering, bleed speed toward v_min over
        the planning horizon (a full-brake fallback would make the clamp to
        -a_max unconditional and turn every starved cycle into a slam stop)."""
        accel = max(-self.cfg.a_max, (self.cfg.v_min - ego.speed) / self.cfg.t_f)
        return ControlCommand(accel=float(min(accel, self.cfg.a_max)), steering=self._prev_steering)

    def mpc_cycle(self, ego: EgoState, vehicles: list[VehicleState]) -> CycleResult:
        goals = sample_goals(ego, self.lanes, self.meta, self.cfg.l, self.cfg.t_f)
        batch = self.build_batch(ego, vehicles, goals)
        warm = self._warm_state(batch) if self.cfg.warm_start else None

        start = time.perf_counter()
        state, info = self.solver.solve(
            batch, max_iter=self.cfg.max_iter, tol=self.cfg.tol, warm=warm,
            keep_multipliers=True,
        )
        solve_time = time.perf_counter() - start

        plan = self.sample_plan(state, goals, info.residual_history[-1])
        filter_candidates(plan, batch, self.cfg.limits)
        rank(plan, self.meta)

        self._prev_state = (state, plan.residuals)
        if plan.best_index is None:
            command = self.fallback_command(ego)
            fallback = True
        else:
            i = plan.best_index
            command = extract_control(
                plan.candidate(i), self.cfg.h, self.basis.grid.dt, self.cfg.dt_cycle
            )
            command.accel = float(np.clip(command.accel, -self.cfg.a_max, self.cfg.a_max))
            fallback = False
            self._prev_steering = command.steering
        return CycleResult(
            command=command, plan=plan, solve_time=solve_time, info=info, fallback=fallback
        )
