"""Brute-force and independent-method oracles for the solver's updates.

Each closed-form update is checked against a grid search of the objective it
minimizes; the KKT steps are checked against a nullspace-method equality-QP
solver that shares no code with the LU path; the batch solve is checked
against a sequential loop of single-instance solves. Tests and the
``oracle`` CLI subcommand both run these.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import null_space

from .basis import build_basis, build_constant_matrices, build_time_grid
from .solver import BatchSolver, ProblemBatch

GRID_RES = 1e-4


@dataclass
class OracleReport:
    name: str
    cases: int
    max_err: float
    tol: float

    @property
    def ok(self) -> bool:
        return bool(self.max_err <= self.tol)

    def line(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        return f"{status} {self.name}: max err {self.max_err:.3e} <= {self.tol:.1e} over {self.cases} cases"


def _circular_diff(x, y):
    return np.abs(np.angle(np.exp(1j * (x - y))))


def _chunked(n, size=100):
    for lo in range(0, n, size):
        yield lo, min(lo + size, n)


def oracle_alpha_obs(cases: int = 1000, seed: int = 0, res: float = GRID_RES) -> OracleReport:
    """Line-of-sight angle vs grid search of the d-profiled objective.

    For each grid angle the separation ratio is set to its optimal
    (nonnegative) value, which makes the sweep the true 1-D problem the
    closed form solves.
    """
    rng = np.random.default_rng(seed)
    a, b = 5.6, 3.1
    wx = rng.uniform(-40, 40, cases)
    wy = rng.uniform(-40, 40, cases)
    grid = np.arange(-math.pi, math.pi, res)
    ca, sa = np.cos(grid), np.sin(grid)
    worst = 0.0
    for lo, hi in _chunked(cases):
        num = a * ca[None, :] * wx[lo:hi, None] + b * sa[None, :] * wy[lo:hi, None]
        den = (a * ca[None, :]) ** 2 + (b * sa[None, :]) ** 2
        d_best = np.maximum(0.0, num / den)
        cost = (wx[lo:hi, None] - a * d_best * ca[None, :]) ** 2 + (
            wy[lo:hi, None] - b * d_best * sa[None, :]
        ) ** 2
        alpha_grid = grid[np.argmin(cost, axis=1)]
        alpha_closed = np.arctan2(a * wy[lo:hi], b * wx[lo:hi])
        worst = max(worst, float(_circular_diff(alpha_closed, alpha_grid).max()))
    return OracleReport("alpha_obs vs grid", cases, worst, res)


def oracle_d_obs(cases: int = 1000, seed: int = 1, res: float = GRID_RES) -> OracleReport:
    """Clipped separation ratio vs grid search over d >= 1."""
    rng = np.random.default_rng(seed)
    a, b = 5.6, 3.1
    wx = rng.uniform(-30, 30, cases)
    wy = rng.uniform(-30, 30, cases)
    alpha = np.arctan2(a * wy, b * wx)
    ca, sa = np.cos(alpha), np.sin(alpha)
    d_hi = 12.0
    grid = np.arange(1.0, d_hi, res)
    worst = 0.0
    for lo, hi in _chunked(cases, 50):
        cost = (wx[lo:hi, None] - a * grid[None, :] * ca[lo:hi, None]) ** 2 + (
            wy[lo:hi, None] - b * grid[None, :] * sa[lo:hi, None]
        ) ** 2
        d_grid = grid[np.argmin(cost, axis=1)]
        num = a * ca[lo:hi] * wx[lo:hi] + b * sa[lo:hi] * wy[lo:hi]
        den = (a * ca[lo:hi]) ** 2 + (b * sa[lo:hi]) ** 2
        d_closed = np.minimum(np.maximum(1.0, num / den), d_hi)
        worst = max(worst, float(np.abs(d_closed - d_grid).max()))
    return OracleReport("d_obs vs grid", cases, worst, res)


def oracle_alpha_acc(cases: int = 1000, seed: int = 2, res: float = GRID_RES) -> OracleReport:
    """Acceleration angle vs 1-D grid at a fixed positive magnitude."""
    rng = np.random.default_rng(seed)
    ax = rng.uniform(-8, 8, cases)
    ay = rng.uniform(-8, 8, cases)
    d_fixed = rng.uniform(0.5, 8.0, cases)
    grid = np.arange(-math.pi, math.pi, res)
    worst = 0.0
    for lo, hi in _chunked(cases):
        cost = (ax[lo:hi, None] - d_fixed[lo:hi, None] * np.cos(grid)[None, :]) ** 2 + (
            ay[lo:hi, None] - d_fixed[lo:hi, None] * np.sin(grid)[None, :]
        ) ** 2
        alpha_grid = grid[np.argmin(cost, axis=1)]
        alpha_closed = np.arctan2(ay[lo:hi], ax[lo:hi])
        worst = max(worst, float(_circular_diff(alpha_closed, alpha_grid).max()))
    return OracleReport("alpha_acc vs grid", cases, worst, res)


def oracle_d_acc(cases: int = 1000, seed: int = 3, res: float = GRID_RES) -> OracleReport:
    """Clipped acceleration magnitude vs grid over [0, a_max]."""
    rng = np.random.default_rng(seed)
    a_max = 8.0
    ax = rng.uniform(-12, 12, cases)
    ay = rng.uniform(-12, 12, cases)
    alpha = np.arctan2(ay, ax)
    grid = np.arange(0.0, a_max + res, res)
    worst = 0.0
    for lo, hi in _chunked(cases, 50):
        cost = (ax[lo:hi, None] - grid[None, :] * np.cos(alpha[lo:hi, None])) ** 2 + (
            ay[lo:hi, None] - grid[None, :] * np.sin(alpha[lo:hi, None])
        ) ** 2
        d_grid = grid[np.argmin(cost, axis=1)]
        d_closed = np.minimum(np.hypot(ax[lo:hi], ay[lo:hi]), a_max)
        worst = max(worst, float(np.abs(d_closed - d_grid).max()))
    return OracleReport("d_acc vs grid", cases, worst, res)


def oracle_v(cases: int = 1000, seed: int = 4, res: float = GRID_RES) -> OracleReport:
    """Thresholded speed vs grid search of the speed-fit objective."""
    rng = np.random.default_rng(seed)
    v_min, v_max = 0.1, 20.0
    xd = rng.uniform(-25, 25, cases)
    yd = rng.uniform(-25, 25, cases)
    grid = np.arange(v_min, v_max + res, res)
    worst = 0.0
    for lo, hi in _chunked(cases, 50):
        speed = np.hypot(xd[lo:hi], yd[lo:hi])
        cost = (grid[None, :] - speed[:, None]) ** 2
        v_grid = grid[np.argmin(cost, axis=1)]
        v_closed = np.clip(speed, v_min, v_max)
        worst = max(worst, float(np.abs(v_closed - v_grid).max()))
    return OracleReport("v vs grid", cases, worst, res)


# -- KKT equality-QP oracle ------------------------------------------------------


def solve_eq_qp_nullspace(H: np.ndarray, q: np.ndarray, A: np.ndarray, b: np.ndarray):
    """Generic dense equality-constrained QP via the nullspace method.

    Minimizes 0.5 z'Hz - q'z subject to Az = b. Independent of the LU-on-KKT
    path used by the solver.
    """
    z0, *_ = np.linalg.lstsq(A, b, rcond=None)
    N = null_space(A)
    w = np.linalg.solve(N.T @ H @ N, N.T @ (q - H @ z0))
    return z0 + N @ w


def demo_solver(n: int = 100, m: int = 10, degree: int = 10, t_f: float = 10.0) -> BatchSolver:
    grid = build_time_grid(0.0, t_f, n)
    basis = build_basis(grid, degree)
    mats = build_constant_matrices(basis, m)
    return BatchSolver(basis, mats, rho_xy=1.0)


def make_demo_batch(solver: BatchSolver, l: int = 11, seed: int = 0) -> ProblemBatch:
    """A representative dense-road batch on the canonical problem shape."""
    rng = np.random.default_rng(seed)
    grid = solver.basis.grid
    n, m = grid.n, solver.mats.m
    lane_centers = np.array([0.0, 4.0, 8.0, 12.0])
    xi_x = np.empty(m * n)
    xi_y = np.empty(m * n)
    for j in range(m):
        x0 = rng.uniform(20.0, 140.0)
        v = rng.uniform(10.0, 14.0)
        lane = int(rng.integers(0, 4))
        xi_x[j * n : (j + 1) * n] = x0 + v * grid.times
        xi_y[j * n : (j + 1) * n] = lane_centers[lane]
    v_cruise = 15.0
    b_xy = np.zeros((12, l))
    b_psi = np.zeros((4, l))
    for i in range(l):
        goal_y = lane_centers[i % 4]
        b_xy[:, i] = [0.0, v_cruise, 0.0, v_cruise * grid.tf, v_cruise, 0.0,
                      4.0, 0.0, 0.0, goal_y, 0.0, 0.0]
    return ProblemBatch(
        l=l, xi_x=xi_x, xi_y=xi_y, a=5.6, b=3.1,
        v_min=0.1, v_max=20.0, a_max=8.0, b_xy=b_xy, b_psi=b_psi,
    )


def oracle_kkt(cases: int = 50, seed: int = 5) -> list[OracleReport]:
    """step_xy / step_psi vs the nullspace QP solver on random instances."""
    solver = demo_solver()
    rng = np.random.default_rng(seed)
    mats = solver.mats
    n_b = solver.basis.n_b
    kkt = solver.kkt
    H_xy = kkt.matrix_xy[: 2 * n_b, : 2 * n_b]
    H_psi = kkt.matrix_psi[:n_b, :n_b]

    worst_res_xy = worst_diff_xy = worst_res_psi = worst_diff_psi = 0.0
    for _ in range(cases):
        batch = make_demo_batch(solver, l=1, seed=int(rng.integers(0, 2**31)))
        state = solver.init_state(batch)
        # random-but-plausible iterates
        state.c_psi = rng.normal(0.0, 0.05, (n_b, 1))
        state.v = rng.uniform(5.0, 20.0, state.v.shape)
        state.alpha = rng.uniform(-math.pi, math.pi, state.alpha.shape)
        state.d = 1.0 + rng.uniform(0.0, 3.0, state.d.shape)
        state.alpha_a = rng.uniform(-math.pi, math.pi, state.alpha_a.shape)
        state.d_a = rng.uniform(0.0, 8.0, state.d_a.shape)
        state.lambda_x = rng.normal(0.0, 10.0, (n_b, 1))
        state.lambda_y = rng.normal(0.0, 10.0, (n_b, 1))
        state.lambda_psi = rng.normal(0.0, 10.0, (n_b, 1))

        g_x, g_y = solver._g_parts(state, batch)
        solver._apply_xy(state, batch, g_x, g_y)
        sol = np.concatenate([state.c_x[:, 0], state.c_y[:, 0]])
        q = np.concatenate(
            [
                batch.rho_xy * (mats.F_axis.T @ g_x[:, 0]) + state.lambda_x[:, 0],
                batch.rho_xy * (mats.F_axis.T @ g_y[:, 0]) + state.lambda_y[:, 0],
            ]
        )
        mu = np.linalg.lstsq(mats.A.T, q - H_xy @ sol, rcond=None)[0]
        full = np.concatenate([sol, mu])
        rhs = np.concatenate([q, batch.b_xy[:, 0]])
        worst_res_xy = max(
            worst_res_xy, float(np.abs(kkt.matrix_xy @ full - rhs).max())
        )
        ref = solve_eq_qp_nullspace(H_xy, q, mats.A, batch.b_xy[:, 0])
        scale = max(1.0, float(np.abs(ref).max()))
        worst_diff_xy = max(worst_diff_xy, float(np.abs(sol - ref).max()) / scale)

        solver.step_psi(state, batch)
        xdot = solver.basis.Pdot @ state.c_x
        ydot = solver.basis.Pdot @ state.c_y
        theta = np.unwrap(np.arctan2(ydot, xdot), axis=0)
        q_psi = batch.rho_xy * (solver.basis.P.T @ theta[:, 0]) + state.lambda_psi[:, 0]
        sol_psi = state.c_psi[:, 0]
        mu_psi = np.linalg.lstsq(mats.A_psi.T, q_psi - H_psi @ sol_psi, rcond=None)[0]
        full_psi = np.concatenate([sol_psi, mu_psi])
        rhs_psi = np.concatenate([q_psi, batch.b_psi[:, 0]])
        worst_res_psi = max(
            worst_res_psi, float(np.abs(kkt.matrix_psi @ full_psi - rhs_psi).max())
        )
        ref_psi = solve_eq_qp_nullspace(H_psi, q_psi, mats.A_psi, batch.b_psi[:, 0])
        scale = max(1.0, float(np.abs(ref_psi).max()))
        worst_diff_psi = max(worst_diff_psi, float(np.abs(sol_psi - ref_psi).max()) / scale)

    return [
        OracleReport("kkt xy residual", cases, worst_res_xy, 1e-8),
        OracleReport("kkt xy vs nullspace QP", cases, worst_diff_xy, 1e-10),
        OracleReport("kkt psi residual", cases, worst_res_psi, 1e-8),
        OracleReport("kkt psi vs nullspace QP", cases, worst_diff_psi, 1e-10),
    ]


def oracle_batch_vs_sequential(l: int = 11, iters: int = 60, seed: int = 7) -> OracleReport:
    """Batched solve vs l independent single-instance solves, iterate by iterate."""
    solver = demo_solver()
    batch = make_demo_batch(solver, l=l, seed=seed)
    _, info = solver.solve(batch, max_iter=iters, tol=0.0, record_iterates=True)

    # Differences are measured relative to the iterate's scale: coefficients
    # carry road coordinates (hundreds of meters), where an absolute 1e-10
    # sits below the rounding accumulated by any distinct BLAS call shapes.
    worst = 0.0
    for i in range(l):
        single = ProblemBatch(
            l=1, xi_x=batch.xi_x, xi_y=batch.xi_y, a=batch.a, b=batch.b,
            v_min=batch.v_min, v_max=batch.v_max, a_max=batch.a_max,
            b_xy=batch.b_xy[:, i : i + 1], b_psi=batch.b_psi[:, i : i + 1],
            rho_xy=batch.rho_xy,
        )
        _, info_i = solver.solve(single, max_iter=iters, tol=0.0, record_iterates=True)
        for it, (cx, cy, cp) in enumerate(info_i.iterates):
            bx, by, bp = info.iterates[it]
            for ref, got in ((cx[:, 0], bx[:, i]), (cy[:, 0], by[:, i]), (cp[:, 0], bp[:, i])):
                scale = max(1.0, float(np.abs(ref).max()))
                worst = max(worst, float(np.abs(ref - got).max()) / scale)
    return OracleReport("batch vs sequential iterates (relative)", l * iters, worst, 1e-10)


SUITES = {
    "closed_forms": lambda: [
        oracle_alpha_obs(),
        oracle_d_obs(),
        oracle_alpha_acc(),
        oracle_d_acc(),
        oracle_v(),
    ],
    "kkt": oracle_kkt,
    "batch": lambda: [oracle_batch_vs_sequential()],
}
SUITES["all"] = lambda: [r for name in ("closed_forms", "kkt", "batch") for r in SUITES[name]()]


def run_suite(name: str) -> tuple[bool, list[str]]:
    if name not in SUITES:
        raise KeyError(f"unknown oracle suite {name!r}; choose from {sorted(SUITES)}")
    reports = SUITES[name]()
    return all(r.ok for r in reports), [r.line() for r in reports]
