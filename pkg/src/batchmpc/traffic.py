"""Neighbor-vehicle motion: IDM simulation, trace playback, and predictions.

Vehicles move parallel to lane centerlines in the road-aligned frame. The
planner consumes snapshots (:class:`VehicleState` lists) and constant-velocity
predictions; it never reaches into the simulation internals.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

HARD_DECEL = 12.0  # m/s^2, emergency cap for degenerate (nonpositive) gaps


@dataclass
class VehicleState:
    id: int
    x: float
    y: float
    vx: float
    vy: float
    lane: int


@dataclass(frozen=True)
class IdmParams:
    """Standard Intelligent Driver Model parameters."""

    v0: float = 15.0
    T: float = 1.5
    s0: float = 2.0
    a_idm: float = 1.5
    b_idm: float = 2.0

    def __post_init__(self):
        if min(self.v0, self.T, self.s0, self.a_idm, self.b_idm) <= 0:
            raise ValueError("all IDM parameters must be positive")


def idm_accel(follower: VehicleState, leader: VehicleState | None, p: IdmParams) -> float:
    """IDM longitudinal acceleration; gaps are center-to-center.

    A nonpositive gap (overlapping or reversed order) returns a hard
    deceleration instead of the singular formula value.
    """
    v = follower.vx
    free = 1.0 - (v / p.v0) ** 4
    if leader is None:
        return p.a_idm * free
    s = leader.x - follower.x
    if s <= 0.0:
        return -min(5.0 * p.b_idm, HARD_DECEL)
    dv = v - leader.vx
    s_star = p.s0 + v * p.T + v * dv / (2.0 * np.sqrt(p.a_idm * p.b_idm))
    return p.a_idm * (free - (s_star / s) ** 2)


@dataclass
class IdmVehicle:
    id: int
    lane: int
    x: float
    v: float
    params: IdmParams


class IdmWorld:
    """Lane-bound IDM vehicles, stepped with semi-implicit Euler.

    Vehicles react to the nearest vehicle ahead in their own lane; lateral
    position stays glued to the lane centerline.
    """

    def __init__(self, vehicles: list[IdmVehicle], lane_centers: np.ndarray):
        self.vehicles = list(vehicles)
        self.lane_centers = np.asarray(lane_centers, dtype=float)
        for veh in self.vehicles:
            if not 0 <= veh.lane < len(self.lane_centers):
                raise ValueError(f"vehicle {veh.id} is off the road (lane {veh.lane})")

    def leader_of(self, veh: IdmVehicle) -> IdmVehicle | None:
        ahead = [o for o in self.vehicles if o.lane == veh.lane and o.x > veh.x]
        return min(ahead, key=lambda o: o.x, default=None)

    def step(self, dt: float, ego: VehicleState | None = None) -> None:
        """Advance all vehicles; traffic treats the ego (when given) as one
        more vehicle in front to follow, like any other leader."""
        if dt <= 0.0:
            raise ValueError(f"dt must be positive, got {dt}")
        accels = []
        for veh in self.vehicles:
            lead = self.leader_of(veh)
            lead_state = self._as_state(lead) if lead else None
            if ego is not None and ego.lane == veh.lane and ego.x > veh.x:
                if lead_state is None or ego.x < lead_state.x:
                    lead_state = ego
            accels.append(idm_accel(self._as_state(veh), lead_state, veh.params))
        for veh, a in zip(self.vehicles, accels):
            veh.v = max(0.0, veh.v + a * dt)
            veh.x += veh.v * dt

    def _as_state(self, veh: IdmVehicle) -> VehicleState:
        return VehicleState(
            id=veh.id, x=veh.x, y=float(self.lane_centers[veh.lane]),
            vx=veh.v, vy=0.0, lane=veh.lane,
        )

    def states(self) -> list[VehicleState]:
        return [self._as_state(v) for v in self.vehicles]


@dataclass
class _Track:
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    vx: np.ndarray
    vy: np.ndarray


class TraceTable:
    """Recorded vehicle trajectories, CSV columns ``t,id,x,y,vx,vy``.

    Playback interpolates linearly between samples; past the final sample a
    vehicle holds its last velocity, before the first it holds its first
    position.
    """

    def __init__(self, tracks: dict[int, _Track]):
        self.tracks = tracks

    @classmethod
    def from_csv(cls, path) -> "TraceTable":
        rows: dict[int, list[tuple[float, float, float, float, float]]] = {}
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            expected = {"t", "id", "x", "y", "vx", "vy"}
            if reader.fieldnames is None or set(reader.fieldnames) != expected:
                raise ValueError(f"{path}: trace header must be t,id,x,y,vx,vy")
            for row in reader:
                rows.setdefault(int(row["id"]), []).append(
                    (float(row["t"]), float(row["x"]), float(row["y"]),
                     float(row["vx"]), float(row["vy"]))
                )
        tracks = {}
        for vid, samples in rows.items():
            t = np.array([s[0] for s in samples])
            if np.any(np.diff(t) <= 0.0):
                raise ValueError(f"{path}: non-monotone or duplicate timestamps for id {vid}")
            tracks[vid] = _Track(
                t=t,
                x=np.array([s[1] for s in samples]),
                y=np.array([s[2] for s in samples]),
                vx=np.array([s[3] for s in samples]),
                vy=np.array([s[4] for s in samples]),
            )
        return cls(tracks)

    def sample(self, vid: int, t: float) -> tuple[float, float, float, float]:
        tr = self.tracks[vid]
        if t >= tr.t[-1]:
            dt = t - tr.t[-1]
            return (tr.x[-1] + tr.vx[-1] * dt, tr.y[-1] + tr.vy[-1] * dt, tr.vx[-1], tr.vy[-1])
        if t <= tr.t[0]:
            return (tr.x[0], tr.y[0], tr.vx[0], tr.vy[0])
        return (
            float(np.interp(t, tr.t, tr.x)),
            float(np.interp(t, tr.t, tr.y)),
            float(np.interp(t, tr.t, tr.vx)),
            float(np.interp(t, tr.t, tr.vy)),
        )


class TraceWorld:
    """Clocked playback of a :class:`TraceTable`."""

    def __init__(self, table: TraceTable, lane_centers: np.ndarray, t0: float = 0.0):
        self.table = table
        self.lane_centers = np.asarray(lane_centers, dtype=float)
        self.t = t0

    def step(self, dt: float, ego: VehicleState | None = None) -> None:
        if dt <= 0.0:
            raise ValueError(f"dt must be positive, got {dt}")
        self.t += dt

    def states(self) -> list[VehicleState]:
        out = []
        for vid in sorted(self.table.tracks):
            x, y, vx, vy = self.table.sample(vid, self.t)
            lane = int(np.argmin(np.abs(self.lane_centers - y)))
            out.append(VehicleState(id=vid, x=x, y=y, vx=vx, vy=vy, lane=lane))
        return out


def select_nearest(
    states: list[VehicleState], ego_x: float, ego_y: float, m: int
) -> list[VehicleState]:
    """The m vehicles closest to the ego, padded with far-away virtual ones.

    Padding keeps the solver's matrix shapes (and its factorizations)
    identical across MPC cycles regardless of local traffic density.
    """
    ranked = sorted(states, key=lambda s: (s.x - ego_x) ** 2 + (s.y - ego_y) ** 2)
    picked = ranked[:m]
    while len(picked) < m:
        picked.append(
            VehicleState(id=-1, x=ego_x + 1.0e4, y=ego_y + 1.0e4, vx=0.0, vy=0.0, lane=0)
        )
    return picked


def predict_constant_velocity(
    states: list[VehicleState], times: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Stacked constant-velocity predictions over the grid.

    Flat layout: entry j*n + k is obstacle j at sample k, the order the
    stacked obstacle matrix expects.
    """
    rel = np.asarray(times, dtype=float)
    rel = rel - rel[0]
    n = rel.shape[0]
    m = len(states)
    xi_x = np.empty(m * n)
    xi_y = np.empty(m * n)
    for j, s in enumerate(states):
        xi_x[j * n : (j + 1) * n] = s.x + s.vx * rel
        xi_y[j * n : (j + 1) * n] = s.y + s.vy * rel
    return xi_x, xi_y
