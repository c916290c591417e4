"""Scenario runner: config loading, closed-loop simulation, metrics, logs.

A scenario couples the traffic world and the planner in lockstep at a fixed
cycle period. Runs are deterministic given (config, seed): the run.jsonl
log is byte-identical across replays. Wall-clock solve times are inherently
nondeterministic, so they are written to a times.csv sidecar instead of the
log itself; the summary merges both.
"""

from __future__ import annotations

import csv
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .planner import (
    CycleResult,
    EgoState,
    FilterLimits,
    LaneGeometry,
    MetaCostSpec,
    Planner,
    PlannerConfig,
)
from .traffic import IdmParams, IdmVehicle, IdmWorld, TraceTable, TraceWorld, VehicleState


class ConfigError(Exception):
    """Invalid or missing scenario configuration."""


class ScenarioAborted(Exception):
    """A cycle failed mid-run; carries the partial log for flushing."""

    def __init__(self, cause: Exception, log: "RunLog"):
        super().__init__(f"scenario aborted at cycle {len(log.records)}: {cause}")
        self.cause = cause
        self.log = log


@dataclass
class VehicleSpec:
    lane: int
    x: float
    v: float
    v0: float


@dataclass
class ScenarioConfig:
    kind: str = "cruise"
    duration: float = 60.0
    seed: int = 0
    dt: float = 0.1
    lanes: int = 4
    lane_width: float = 4.0
    ego_lane: int = 1
    ego_x: float = 0.0
    ego_v: float = 15.0
    traffic_source: str = "idm"
    vehicles: list[VehicleSpec] = field(default_factory=list)
    n_random: int = 0
    x_range: tuple[float, float] = (20.0, 160.0)
    v0_range: tuple[float, float] = (9.0, 13.0)
    idm: IdmParams = IdmParams()
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
    v_cruise: float = 15.0
    meta_v_max: float | None = None
    w1: float = 1.0
    w2: float = 0.1
    y_rl: float | None = None
    heading_limit_deg: float = 13.0
    residual_tol: float = 1e-3
    collision_margin: float = 0.01
    h: float = 2.5
    warm_start: bool = True
    base_dir: Path = Path(".")

    def validate(self) -> None:
        if self.kind not in ("cruise", "highspeed"):
            raise ConfigError(f"scenario.kind must be cruise or highspeed, got {self.kind!r}")
        if self.duration <= 0 or self.dt <= 0:
            raise ConfigError("scenario.duration and scenario.dt must be positive")
        if self.lanes < 1 or self.lane_width <= 0:
            raise ConfigError("road must have >= 1 lane of positive width")
        if not 0 <= self.ego_lane < self.lanes:
            raise ConfigError(f"ego.lane {self.ego_lane} outside road of {self.lanes} lanes")
        if not (self.traffic_source == "idm" or self.traffic_source.startswith("trace:")):
            raise ConfigError(f"traffic.source must be 'idm' or 'trace:<path>', got {self.traffic_source!r}")
        if self.traffic_source.startswith("trace:"):
            trace_path = self.base_dir / self.traffic_source.split(":", 1)[1]
            if not trace_path.exists():
                raise ConfigError(f"trace file not found: {trace_path}")
        if self.l < self.lanes:
            raise ConfigError(f"solver.l = {self.l} must be >= lane count {self.lanes}")
        if not 0 < self.v_min < self.v_max:
            raise ConfigError("bounds must satisfy 0 < v_min < v_max")
        if self.a_max <= 0 or self.a < self.b or self.b <= 0:
            raise ConfigError("need a_max > 0 and ellipse a >= b > 0")
        for veh in self.vehicles:
            if not 0 <= veh.lane < self.lanes:
                raise ConfigError(f"traffic vehicle in lane {veh.lane} is off the road")

    @property
    def lane_geometry(self) -> LaneGeometry:
        return LaneGeometry(n_lanes=self.lanes, width=self.lane_width)

    @property
    def meta_spec(self) -> MetaCostSpec:
        y_rl = self.lane_geometry.y_right if self.y_rl is None else self.y_rl
        # The task's target speed defaults to the physical bound but may sit
        # inside it so that target-speed goals remain reachable.
        v_target = self.v_max if self.meta_v_max is None else self.meta_v_max
        return MetaCostSpec(
            kind=self.kind, v_cruise=self.v_cruise, v_max=v_target,
            y_rl=y_rl, w1=self.w1, w2=self.w2,
        )

    @property
    def planner_config(self) -> PlannerConfig:
        return PlannerConfig(
            l=self.l, n=self.n, t_f=self.t_f, degree=self.degree, rho_xy=self.rho_xy,
            max_iter=self.max_iter, tol=self.tol, m=self.m, a=self.a, b=self.b,
            v_min=self.v_min, v_max=self.v_max, a_max=self.a_max, h=self.h,
            dt_cycle=self.dt, warm_start=self.warm_start,
            limits=FilterLimits(
                heading_limit=math.radians(self.heading_limit_deg),
                residual_tol=self.residual_tol,
                collision_margin=self.collision_margin,
            ),
        )


def _section(data: dict, name: str) -> dict:
    sec = data.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"[{name}] must be a table")
    return sec


def load_config(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    cfg = ScenarioConfig(base_dir=path.parent.resolve())
    scen = _section(data, "scenario")
    if "seed" not in scen:
        raise ConfigError("scenario.seed is mandatory (runs must be reproducible)")
    cfg.kind = scen.get("kind", cfg.kind)
    cfg.duration = float(scen.get("duration", cfg.duration))
    cfg.seed = int(scen["seed"])
    cfg.dt = float(scen.get("dt", cfg.dt))

    road = _section(data, "road")
    cfg.lanes = int(road.get("lanes", cfg.lanes))
    cfg.lane_width = float(road.get("lane_width", cfg.lane_width))

    ego = _section(data, "ego")
    cfg.ego_lane = int(ego.get("lane", cfg.ego_lane))
    cfg.ego_x = float(ego.get("x", cfg.ego_x))
    cfg.ego_v = float(ego.get("v", cfg.ego_v))

    traffic = _section(data, "traffic")
    cfg.traffic_source = traffic.get("source", cfg.traffic_source)
    cfg.n_random = int(traffic.get("n_random", 0))
    cfg.x_range = tuple(traffic.get("x_range", cfg.x_range))
    cfg.v0_range = tuple(traffic.get("v0_range", cfg.v0_range))
    idm = traffic.get("idm", {})
    cfg.idm = IdmParams(
        v0=float(idm.get("v0", 15.0)), T=float(idm.get("T", 1.5)),
        s0=float(idm.get("s0", 2.0)), a_idm=float(idm.get("a_idm", 1.5)),
        b_idm=float(idm.get("b_idm", 2.0)),
    )
    for veh in traffic.get("vehicle", []):
        try:
            spec = VehicleSpec(
                lane=int(veh["lane"]), x=float(veh["x"]), v=float(veh["v"]),
                v0=float(veh.get("v0", veh["v"])),
            )
        except KeyError as exc:
            raise ConfigError(f"traffic.vehicle entries need lane, x, v (missing {exc})") from exc
        cfg.vehicles.append(spec)

    solver = _section(data, "solver")
    for key in ("l", "n", "degree", "max_iter", "m"):
        if key in solver:
            setattr(cfg, key, int(solver[key]))
    for key in ("t_f", "rho_xy", "tol"):
        if key in solver:
            setattr(cfg, key, float(solver[key]))

    meta = _section(data, "meta")
    cfg.v_cruise = float(meta.get("v_cruise", cfg.v_cruise))
    if "v_max" in meta:
        cfg.meta_v_max = float(meta["v_max"])
    cfg.w1 = float(meta.get("w1", cfg.w1))
    cfg.w2 = float(meta.get("w2", cfg.w2))
    if "y_rl" in meta:
        cfg.y_rl = float(meta["y_rl"])

    ellipse = _section(data, "ellipse")
    cfg.a = float(ellipse.get("a", cfg.a))
    cfg.b = float(ellipse.get("b", cfg.b))

    bounds = _section(data, "bounds")
    cfg.v_min = float(bounds.get("v_min", cfg.v_min))
    cfg.v_max = float(bounds.get("v_max", cfg.v_max))
    cfg.a_max = float(bounds.get("a_max", cfg.a_max))

    limits = _section(data, "limits")
    cfg.heading_limit_deg = float(limits.get("heading_limit_deg", cfg.heading_limit_deg))
    cfg.residual_tol = float(limits.get("residual_tol", cfg.residual_tol))
    cfg.collision_margin = float(limits.get("collision_margin", cfg.collision_margin))

    control = _section(data, "control")
    cfg.h = float(control.get("h", cfg.h))
    cfg.warm_start = bool(control.get("warm_start", cfg.warm_start))

    cfg.validate()
    return cfg


def build_traffic(cfg: ScenarioConfig, rng: np.random.Generator):
    lanes = cfg.lane_geometry
    if cfg.traffic_source.startswith("trace:"):
        trace_path = cfg.base_dir / cfg.traffic_source.split(":", 1)[1]
        if not trace_path.exists():
            raise ConfigError(f"trace file not found: {trace_path}")
        return TraceWorld(TraceTable.from_csv(trace_path), lanes.centers)

    vehicles: list[IdmVehicle] = []
    next_id = 0
    for spec in cfg.vehicles:
        p = IdmParams(
            v0=spec.v0, T=cfg.idm.T, s0=cfg.idm.s0, a_idm=cfg.idm.a_idm, b_idm=cfg.idm.b_idm
        )
        vehicles.append(IdmVehicle(id=next_id, lane=spec.lane, x=spec.x, v=spec.v, params=p))
        next_id += 1
    ego_y = lanes.centers[cfg.ego_lane]
    for _ in range(cfg.n_random):
        for _attempt in range(100):
            lane = int(rng.integers(0, cfg.lanes))
            x = float(rng.uniform(*cfg.x_range))
            v0 = float(rng.uniform(*cfg.v0_range))
            # keep a safe bubble around the ego spawn and other vehicles
            if abs(x - cfg.ego_x) < 2.5 * cfg.a and lane == cfg.ego_lane:
                continue
            if math.hypot((x - cfg.ego_x) / cfg.a, (lanes.centers[lane] - ego_y) / cfg.b) < 1.5:
                continue
            if any(o.lane == lane and abs(o.x - x) < 3.0 * cfg.a for o in vehicles):
                continue
            p = IdmParams(
                v0=v0, T=cfg.idm.T, s0=cfg.idm.s0, a_idm=cfg.idm.a_idm, b_idm=cfg.idm.b_idm
            )
            vehicles.append(IdmVehicle(id=next_id, lane=lane, x=x, v=v0, params=p))
            next_id += 1
            break
    return IdmWorld(vehicles, lanes.centers)


@dataclass
class RunLog:
    """In-memory run record; see write_log for the on-disk layout."""

    meta: dict
    records: list[dict]
    solve_times: list[float]


def _round_list(values, digits=9):
    return [round(float(v), digits) for v in values]


def run_scenario(
    cfg: ScenarioConfig, emit_candidates: bool = False, progress: bool = False
) -> RunLog:
    """Step simulator and planner in lockstep for the configured duration."""
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    lanes = cfg.lane_geometry
    world = build_traffic(cfg, rng)
    meta_spec = cfg.meta_spec
    planner = Planner(cfg.planner_config, lanes, meta_spec)
    ego = EgoState(
        x=cfg.ego_x, y=float(lanes.centers[cfg.ego_lane]), psi=0.0, psidot=0.0,
        vx=cfg.ego_v, vy=0.0, ax=0.0, ay=0.0,
    )

    meta = {
        "type": "meta",
        "kind": cfg.kind,
        "seed": cfg.seed,
        "dt": cfg.dt,
        "duration": cfg.duration,
        "lanes": cfg.lanes,
        "lane_width": cfg.lane_width,
        "ellipse": {"a": cfg.a, "b": cfg.b},
        "y_rl": meta_spec.y_rl,
        "v_cruise": meta_spec.v_cruise,
        "v_max": meta_spec.v_max,
        "w1": meta_spec.w1,
        "w2": meta_spec.w2,
        "solver": {
            "l": cfg.l, "n": cfg.n, "t_f": cfg.t_f, "degree": cfg.degree,
            "rho_xy": cfg.rho_xy, "max_iter": cfg.max_iter, "tol": cfg.tol, "m": cfg.m,
        },
        "grid_times": _round_list(planner.basis.grid.times),
        "emit_candidates": bool(emit_candidates),
    }

    records: list[dict] = []
    solve_times: list[float] = []
    n_cycles = int(round(cfg.duration / cfg.dt))
    for cycle in range(n_cycles):
        states = world.states()
        try:
            result = planner.mpc_cycle(ego, states)
        except Exception as exc:
            raise ScenarioAborted(exc, RunLog(meta=meta, records=records, solve_times=solve_times))
        records.append(_record(cycle, cfg, ego, states, result, emit_candidates))
        solve_times.append(result.solve_time)
        ego = _apply_command(ego, result.command, cfg.dt, cfg.h)
        ego_as_vehicle = VehicleState(
            id=-100, x=ego.x, y=ego.y, vx=ego.vx, vy=ego.vy, lane=lanes.lane_of(ego.y)
        )
        world.step(cfg.dt, ego=ego_as_vehicle)
        if progress and cycle % 50 == 0:
            print(f"  cycle {cycle}/{n_cycles}", file=sys.stderr)
    return RunLog(meta=meta, records=records, solve_times=solve_times)


def _record(cycle, cfg, ego, states, result: CycleResult, emit_candidates) -> dict:
    plan = result.plan
    hist = result.info.residual_history
    best = plan.best_index
    rb = best if best is not None else int(np.argmin(plan.residuals.max_per_instance()))
    rec = {
        "cycle": cycle,
        "t": round(cycle * cfg.dt, 9),
        "ego": {
            "x": ego.x, "y": ego.y, "psi": ego.psi, "psidot": ego.psidot,
            "vx": ego.vx, "vy": ego.vy, "ax": ego.ax, "ay": ego.ay,
        },
        "obstacles": [
            {"id": s.id, "x": s.x, "y": s.y, "vx": s.vx, "vy": s.vy, "lane": s.lane}
            for s in states
        ],
        "goal_lanes": [g.lane for g in plan.goals],
        "meta_costs": _round_list(plan.meta_cost),
        "feasible": [bool(f) for f in plan.feasible],
        "min_ratio": _round_list(plan.min_ratio),
        "heading_max": _round_list(plan.heading_max),
        "best_index": best,
        "fallback": result.fallback,
        "converged": result.info.converged,
        "residual_iters": result.info.iterations,
        "residuals_best": {
            "obs": _round_list([r.r_obs[rb] for r in hist]),
            "acc": _round_list([r.r_acc[rb] for r in hist]),
            "nonhol": _round_list([r.r_nonhol[rb] for r in hist]),
        },
        "command": {"accel": result.command.accel, "steering": result.command.steering},
    }
    if emit_candidates:
        rec["candidates"] = {
            "x": [_round_list(plan.x[:, i], 4) for i in range(plan.l)],
            "y": [_round_list(plan.y[:, i], 4) for i in range(plan.l)],
            "psi": [_round_list(plan.psi[:, i], 6) for i in range(plan.l)],
            "v": [_round_list(plan.v[:, i], 4) for i in range(plan.l)],
        }
    return rec


def _apply_command(ego: EgoState, command, dt: float, h: float) -> EgoState:
    """Advance the ego with unicycle kinematics under (accel, steering)."""
    v = ego.speed
    psidot = math.tan(command.steering) * v / h if v > 1e-9 else 0.0
    v_new = max(0.0, v + command.accel * dt)
    psi_new = ego.psi + psidot * dt
    vx_new = v_new * math.cos(psi_new)
    vy_new = v_new * math.sin(psi_new)
    return EgoState(
        x=ego.x + vx_new * dt,
        y=ego.y + vy_new * dt,
        psi=psi_new,
        psidot=psidot,
        vx=vx_new,
        vy=vy_new,
        ax=(vx_new - ego.vx) / dt,
        ay=(vy_new - ego.vy) / dt,
    )


# -- persistence ---------------------------------------------------------------


def _json_line(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def write_log(log: RunLog, out_dir: str | Path) -> dict[str, Path]:
    """Write run.jsonl (deterministic), times.csv (wall clock), summary.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    run_path = out / "run.jsonl"
    with open(run_path, "w") as fh:
        fh.write(_json_line(log.meta) + "\n")
        for rec in log.records:
            fh.write(_json_line(rec) + "\n")
    times_path = out / "times.csv"
    with open(times_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cycle", "solve_time"])
        for i, t in enumerate(log.solve_times):
            writer.writerow([i, f"{t:.6f}"])
    summary_path = out / "summary.json"
    with open(summary_path, "w") as fh:
        json.dump(summarize(log).to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return {"run": run_path, "times": times_path, "summary": summary_path}


def read_log(path: str | Path) -> RunLog:
    """Load run.jsonl (+ sibling times.csv when present) back into a RunLog."""
    path = Path(path)
    meta = None
    records = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if obj.get("type") == "meta":
                meta = obj
            else:
                records.append(obj)
    if meta is None:
        raise ValueError(f"{path}: missing meta line")
    solve_times = []
    times_path = path.parent / "times.csv"
    if times_path.exists():
        with open(times_path, newline="") as fh:
            solve_times = [float(row["solve_time"]) for row in csv.DictReader(fh)]
    return RunLog(meta=meta, records=records, solve_times=solve_times)


# -- metrics -------------------------------------------------------------------


@dataclass(frozen=True)
class Stat:
    mean: float
    min: float
    max: float

    @classmethod
    def of(cls, values) -> "Stat":
        arr = np.asarray(values, dtype=float)
        if arr.size == 0:
            return cls(math.nan, math.nan, math.nan)
        return cls(float(arr.mean()), float(arr.min()), float(arr.max()))

    def to_dict(self) -> dict:
        return {"mean": self.mean, "min": self.min, "max": self.max}


@dataclass(frozen=True)
class MetricsSummary:
    cycles: int
    meta_cost: Stat
    lin_acc: Stat
    ang_acc: Stat
    velocity: Stat
    lat_dist: Stat
    solve_time: Stat
    collision_count: int
    fallback_count: int

    def to_dict(self) -> dict:
        return {
            "cycles": self.cycles,
            "meta_cost": self.meta_cost.to_dict(),
            "lin_acc": self.lin_acc.to_dict(),
            "ang_acc": self.ang_acc.to_dict(),
            "velocity": self.velocity.to_dict(),
            "lat_dist": self.lat_dist.to_dict(),
            "solve_time": self.solve_time.to_dict(),
            "collision_count": self.collision_count,
            "fallback_count": self.fallback_count,
        }


def collision_count(log: RunLog) -> int:
    """Cycles where the ego/obstacle ellipse ratio drops below 1, computed
    from raw logged positions only."""
    a = log.meta["ellipse"]["a"]
    b = log.meta["ellipse"]["b"]
    count = 0
    for rec in log.records:
        ex, ey = rec["ego"]["x"], rec["ego"]["y"]
        for obs in rec["obstacles"]:
            if math.hypot((ex - obs["x"]) / a, (ey - obs["y"]) / b) < 1.0:
                count += 1
                break
    return count


def min_logged_ratio(log: RunLog) -> float:
    """Smallest ego/obstacle ellipse ratio over the whole run."""
    a = log.meta["ellipse"]["a"]
    b = log.meta["ellipse"]["b"]
    worst = math.inf
    for rec in log.records:
        ex, ey = rec["ego"]["x"], rec["ego"]["y"]
        for obs in rec["obstacles"]:
            worst = min(worst, math.hypot((ex - obs["x"]) / a, (ey - obs["y"]) / b))
    return worst


def summarize(log: RunLog) -> MetricsSummary:
    """Aggregate executed-trajectory metrics; a pure function of the log."""
    if not log.records:
        raise ValueError("cannot summarize an empty log")
    meta = log.meta
    dt = meta["dt"]
    speeds = np.array([math.hypot(r["ego"]["vx"], r["ego"]["vy"]) for r in log.records])
    psidots = np.array([r["ego"]["psidot"] for r in log.records])
    ys = np.array([r["ego"]["y"] for r in log.records])
    if meta["kind"] == "cruise":
        inst_cost = (speeds - meta["v_cruise"]) ** 2
    else:
        inst_cost = meta["w1"] * (speeds - meta["v_max"]) ** 2 + meta["w2"] * (
            ys - meta["y_rl"]
        ) ** 2
    lin_acc = np.abs(np.diff(speeds)) / dt
    ang_acc = np.abs(np.diff(psidots)) / dt
    return MetricsSummary(
        cycles=len(log.records),
        meta_cost=Stat.of(inst_cost),
        lin_acc=Stat.of(lin_acc),
        ang_acc=Stat.of(ang_acc),
        velocity=Stat.of(speeds),
        lat_dist=Stat.of(np.abs(ys - meta["y_rl"])),
        solve_time=Stat.of(log.solve_times),
        collision_count=collision_count(log),
        fallback_count=sum(1 for r in log.records if r["fallback"]),
    )


# -- batch-size timing sweep -----------------------------------------------------


def bench_batch(cfg: ScenarioConfig, sizes: list[int], cycles: int = 30) -> list[dict]:
    """Mean/min/max solve time per batch size over a shortened run."""
    rows = []
    for size in sizes:
        sized = ScenarioConfig(**{**cfg.__dict__, "l": size, "duration": cycles * cfg.dt})
        sized.vehicles = list(cfg.vehicles)
        log = run_scenario(sized)
        times = np.array(log.solve_times)
        rows.append(
            {
                "l": size,
                "n_solves": len(times),
                "mean": float(times.mean()),
                "min": float(times.min()),
                "max": float(times.max()),
            }
        )
    return rows


def write_timing_csv(rows: list[dict], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["l", "n_solves", "mean", "min", "max"])
        writer.writeheader()
        writer.writerows(rows)
