"""Alternating-minimization batch trajectory optimizer.

Solves ``l`` goal-directed non-holonomic trajectory problems at once. All
instances share the constant matrices, so the two KKT systems are factorized
once per problem shape and every iteration reduces to multi-column
back-substitutions plus elementwise closed-form updates; the per-iteration
cost grows only with the number of right-hand sides, not with refactoring
work.

Per-instance data lives in columns: coefficient arrays are (n_b, l), sampled
arrays (n, l), obstacle-stacked arrays (m*n, l).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from . import kernels
from .basis import BasisSet, ConstantMatrices


@dataclass
class ProblemBatch:
    """Shared problem data plus per-instance boundary vectors.

    Obstacle predictions, ellipse geometry and all bounds are common to the
    whole batch; only the boundary right-hand sides ``b_xy`` (stacked x rows
    then y rows) and ``b_psi`` vary per instance.
    """

    l: int
    xi_x: np.ndarray
    xi_y: np.ndarray
    a: float
    b: float
    v_min: float
    v_max: float
    a_max: float
    b_xy: np.ndarray
    b_psi: np.ndarray
    rho_xy: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.v_min < self.v_max:
            raise ValueError(f"need 0 < v_min < v_max, got [{self.v_min}, {self.v_max}]")
        if self.a_max <= 0.0:
            raise ValueError(f"a_max must be positive, got {self.a_max}")
        if not self.a >= self.b > 0.0:
            raise ValueError(f"ellipse axes must satisfy a >= b > 0, got ({self.a}, {self.b})")
        if self.rho_xy <= 0.0:
            raise ValueError(f"rho_xy must be positive, got {self.rho_xy}")
        if self.xi_x.shape != self.xi_y.shape:
            raise ValueError("obstacle prediction arrays must have equal shape")
        if self.b_xy.shape[1] != self.l or self.b_psi.shape[1] != self.l:
            raise ValueError("boundary vectors must have one column per instance")


@dataclass
class AmState:
    """All per-instance iterates of the alternating minimization."""

    c_x: np.ndarray
    c_y: np.ndarray
    c_psi: np.ndarray
    alpha: np.ndarray
    d: np.ndarray
    alpha_a: np.ndarray
    d_a: np.ndarray
    v: np.ndarray
    lambda_x: np.ndarray
    lambda_y: np.ndarray
    lambda_psi: np.ndarray
    iteration: int = 0

    def copy(self) -> "AmState":
        return AmState(
            **{
                f.name: getattr(self, f.name).copy()
                if isinstance(getattr(self, f.name), np.ndarray)
                else getattr(self, f.name)
                for f in dataclasses.fields(self)
            }
        )

    def shapes_match(self, other: "AmState") -> bool:
        return all(
            getattr(self, f.name).shape == getattr(other, f.name).shape
            for f in dataclasses.fields(self)
            if isinstance(getattr(self, f.name), np.ndarray)
        )


@dataclass
class Residuals:
    """Per-instance L2 norms of the three penalty-constraint blocks."""

    r_obs: np.ndarray
    r_acc: np.ndarray
    r_nonhol: np.ndarray

    def max_per_instance(self) -> np.ndarray:
        return np.maximum(self.r_obs, np.maximum(self.r_acc, self.r_nonhol))

    def overall_max(self) -> float:
        return float(self.max_per_instance().max())


@dataclass
class SolveInfo:
    residual_history: list[Residuals]
    iterations: int
    converged: bool
    iterates: list[tuple[np.ndarray, np.ndarray, np.ndarray]] | None = None


class KktSystem:
    """LU factorizations of the two KKT matrices, shared by all instances.

    ``matrix_xy`` couples the stacked (c_x, c_y) coefficients with the
    boundary duals; ``matrix_psi`` does the same for heading. Both are
    factorized exactly once; ``n_factorizations`` and ``n_solves`` exist so
    tests can assert the reuse. Solves apply one step of iterative
    refinement, which keeps KKT residuals near machine precision even for
    right-hand sides at road-coordinate scale.
    """

    def __init__(self, mats: ConstantMatrices, rho_xy: float):
        n_b = mats.basis.n_b
        P = mats.basis.P
        r_xy = mats.A.shape[0]
        r_psi = mats.A_psi.shape[0]

        H = np.zeros((2 * n_b, 2 * n_b))
        H[:n_b, :n_b] = mats.Q + rho_xy * (mats.F_axis.T @ mats.F_axis)
        H[n_b:, n_b:] = H[:n_b, :n_b]
        self.matrix_xy = np.zeros((2 * n_b + r_xy, 2 * n_b + r_xy))
        self.matrix_xy[: 2 * n_b, : 2 * n_b] = H
        self.matrix_xy[: 2 * n_b, 2 * n_b :] = mats.A.T
        self.matrix_xy[2 * n_b :, : 2 * n_b] = mats.A

        self.matrix_psi = np.zeros((n_b + r_psi, n_b + r_psi))
        self.matrix_psi[:n_b, :n_b] = mats.Q + rho_xy * (P.T @ P)
        self.matrix_psi[:n_b, n_b:] = mats.A_psi.T
        self.matrix_psi[n_b:, :n_b] = mats.A_psi

        self.n_factorizations = 0
        self.n_solves = 0
        self._lu_xy = self._factorize(self.matrix_xy)
        self._lu_psi = self._factorize(self.matrix_psi)
        self.matrix_xy.setflags(write=False)
        self.matrix_psi.setflags(write=False)

    def _factorize(self, matrix: np.ndarray):
        self.n_factorizations += 1
        try:
            return lu_factor(matrix)
        except Exception as exc:  # pragma: no cover - guarded by rank check upstream
            raise np.linalg.LinAlgError(f"KKT factorization failed: {exc}") from exc

    @staticmethod
    def _refined_solve(lu, matrix, rhs):
        sol = lu_solve(lu, rhs)
        sol += lu_solve(lu, rhs - matrix @ sol)
        return sol

    def solve_xy(self, rhs: np.ndarray) -> np.ndarray:
        self.n_solves += 1
        return self._refined_solve(self._lu_xy, self.matrix_xy, rhs)

    def solve_psi(self, rhs: np.ndarray) -> np.ndarray:
        self.n_solves += 1
        return self._refined_solve(self._lu_psi, self.matrix_psi, rhs)


class BatchSolver:
    """Algorithm driver tying the basis, constant matrices and KKT systems."""

    def __init__(self, basis: BasisSet, mats: ConstantMatrices, rho_xy: float = 1.0):
        if mats.basis is not basis:
            raise ValueError("constant matrices were built from a different basis")
        self.basis = basis
        self.mats = mats
        self.rho_xy = rho_xy
        self.kkt = KktSystem(mats, rho_xy)
        # Least-squares projector onto the basis, used by cold starts.
        self._P_pinv = np.linalg.pinv(basis.P)
        # One stacked sampling matrix so each axis needs a single product
        # per iteration for positions, velocities and accelerations.
        self._sample_all = np.vstack([basis.P, basis.Pdot, basis.Pddot])

    # -- state construction -------------------------------------------------

    def init_state(
        self,
        batch: ProblemBatch,
        warm: AmState | None = None,
        keep_multipliers: bool = False,
    ) -> AmState:
        """Cold start from straight start-to-goal lines, or copy a warm state.

        Warm starts copy all primal iterates and by default reset the
        multipliers; callers whose warm state comes from a nearly identical
        problem (receding-horizon shifts) can keep them. Initial trajectories
        may be arbitrarily infeasible (e.g. straight through an obstacle);
        the penalty formulation accepts that.
        """
        self._check_batch(batch)
        n = self.basis.grid.n
        l = batch.l

        if warm is not None:
            expected = self._zero_state(batch)
            if not warm.shapes_match(expected):
                raise ValueError("warm state shapes do not match the batch")
            state = warm.copy()
            if not keep_multipliers:
                for lam in (state.lambda_x, state.lambda_y, state.lambda_psi):
                    lam.fill(0.0)
            state.iteration = 0
            return state

        bnd = self.mats.boundary
        rpa = bnd.rows_per_axis
        ix0 = bnd.row_index("t0", 0)
        ixf = bnd.row_index("tf", 0)
        iv0 = bnd.row_index("t0", 1)
        x0, xf = batch.b_xy[ix0], batch.b_xy[ixf]
        y0, yf = batch.b_xy[rpa + ix0], batch.b_xy[rpa + ixf]
        vx0, vy0 = batch.b_xy[iv0], batch.b_xy[rpa + iv0]

        grid = self.basis.grid
        tau = (grid.times - grid.t0) / (grid.tf - grid.t0)
        x_line = x0[None, :] + tau[:, None] * (xf - x0)[None, :]
        y_line = y0[None, :] + tau[:, None] * (yf - y0)[None, :]

        state = self._zero_state(batch)
        state.c_x = self._P_pinv @ x_line
        state.c_y = self._P_pinv @ y_line
        speed0 = np.clip(np.sqrt(vx0 * vx0 + vy0 * vy0), batch.v_min, batch.v_max)
        state.v = np.broadcast_to(speed0, (n, l)).copy()
        # Line-of-sight variables start at their closed forms for the initial
        # trajectory: a plain d = 1 would aim the first penalty target at the
        # boundary of every obstacle ellipse, including the far-away virtual
        # padding ones, and wreck the first coefficient solve.
        state.alpha, state.d = kernels.obstacle_update(
            x_line, y_line, batch.xi_x, batch.xi_y, batch.a, batch.b
        )
        return state

    def _zero_state(self, batch: ProblemBatch) -> AmState:
        n_b, l = self.basis.n_b, batch.l
        n = self.basis.grid.n
        mn = batch.xi_x.shape[0]
        z = np.zeros
        return AmState(
            c_x=z((n_b, l)), c_y=z((n_b, l)), c_psi=z((n_b, l)),
            alpha=z((mn, l)), d=np.ones((mn, l)),
            alpha_a=z((n, l)), d_a=z((n, l)), v=z((n, l)),
            lambda_x=z((n_b, l)), lambda_y=z((n_b, l)), lambda_psi=z((n_b, l)),
        )

    def _check_batch(self, batch: ProblemBatch):
        mn = self.mats.rows_obs
        if batch.xi_x.shape != (mn,):
            raise ValueError(f"expected obstacle predictions of shape ({mn},), got {batch.xi_x.shape}")
        if batch.b_xy.shape[0] != self.mats.A.shape[0]:
            raise ValueError(
                f"b_xy has {batch.b_xy.shape[0]} rows but the boundary matrix has {self.mats.A.shape[0]}"
            )
        if batch.b_psi.shape[0] != self.mats.A_psi.shape[0]:
            raise ValueError(
                f"b_psi has {batch.b_psi.shape[0]} rows but the heading boundary matrix has {self.mats.A_psi.shape[0]}"
            )

    # -- samples and targets -------------------------------------------------

    def _g_parts(self, state: AmState, batch: ProblemBatch) -> tuple[np.ndarray, np.ndarray]:
        psi = self.basis.P @ state.c_psi
        return kernels.assemble_g(
            batch.xi_x, batch.xi_y, state.alpha, state.d,
            state.alpha_a, state.d_a, state.v, psi, batch.a, batch.b,
        )

    def build_g(self, state: AmState, batch: ProblemBatch) -> np.ndarray:
        """Penalty target vector, x-axis blocks stacked above y-axis blocks."""
        g_x, g_y = self._g_parts(state, batch)
        return np.vstack([g_x, g_y])

    # -- individual algorithm steps -------------------------------------------

    def step_xy(self, state: AmState, batch: ProblemBatch) -> tuple[np.ndarray, np.ndarray]:
        """Equality-constrained QP update of the position coefficients, all
        instances in one multi-column solve."""
        g_x, g_y = self._g_parts(state, batch)
        self._apply_xy(state, batch, g_x, g_y)
        return state.c_x, state.c_y

    def _apply_xy(self, state, batch, g_x, g_y):
        n_b = self.basis.n_b
        l = batch.l
        proj = self.mats.F_axis.T @ np.concatenate([g_x, g_y], axis=1)
        rhs = np.empty((self.kkt.matrix_xy.shape[0], l))
        rhs[:n_b] = batch.rho_xy * proj[:, :l] + state.lambda_x
        rhs[n_b : 2 * n_b] = batch.rho_xy * proj[:, l:] + state.lambda_y
        rhs[2 * n_b :] = batch.b_xy
        sol = self.kkt.solve_xy(rhs)
        state.c_x = sol[:n_b].copy()
        state.c_y = sol[n_b : 2 * n_b].copy()

    def step_psi(self, state: AmState, batch: ProblemBatch) -> np.ndarray:
        """Convex-surrogate heading update: fit the unwrapped velocity angle."""
        xdot = self.basis.Pdot @ state.c_x
        ydot = self.basis.Pdot @ state.c_y
        theta = np.unwrap(np.arctan2(ydot, xdot), axis=0)
        self._apply_psi(state, batch, theta)
        return state.c_psi

    def _apply_psi(self, state, batch, theta):
        n_b = self.basis.n_b
        rhs = np.empty((self.kkt.matrix_psi.shape[0], batch.l))
        rhs[:n_b] = batch.rho_xy * (self.basis.P.T @ theta) + state.lambda_psi
        rhs[n_b:] = batch.b_psi
        sol = self.kkt.solve_psi(rhs)
        state.c_psi = sol[:n_b].copy()

    def step_v(self, state: AmState, batch: ProblemBatch) -> np.ndarray:
        xdot = self.basis.Pdot @ state.c_x
        ydot = self.basis.Pdot @ state.c_y
        state.v = kernels.v_update(xdot, ydot, batch.v_min, batch.v_max)
        return state.v

    def step_alpha_obs(self, state: AmState, batch: ProblemBatch) -> np.ndarray:
        x = self.basis.P @ state.c_x
        y = self.basis.P @ state.c_y
        state.alpha, _ = kernels.obstacle_update(x, y, batch.xi_x, batch.xi_y, batch.a, batch.b)
        return state.alpha

    def step_d_obs(self, state: AmState, batch: ProblemBatch) -> np.ndarray:
        """1-D bound-constrained QP over each separation ratio, given alpha."""
        n = self.basis.grid.n
        m = batch.xi_x.shape[0] // n
        x = self.basis.P @ state.c_x
        y = self.basis.P @ state.c_y
        wx = np.tile(x, (m, 1)) - batch.xi_x[:, None]
        wy = np.tile(y, (m, 1)) - batch.xi_y[:, None]
        ca, sa = np.cos(state.alpha), np.sin(state.alpha)
        num = batch.a * ca * wx + batch.b * sa * wy
        den = (batch.a * ca) ** 2 + (batch.b * sa) ** 2
        state.d = np.maximum(1.0, num / den)
        return state.d

    def step_alpha_acc(self, state: AmState, batch: ProblemBatch) -> np.ndarray:
        xddot = self.basis.Pddot @ state.c_x
        yddot = self.basis.Pddot @ state.c_y
        state.alpha_a = np.arctan2(yddot, xddot)
        return state.alpha_a

    def step_d_acc(self, state: AmState, batch: ProblemBatch) -> np.ndarray:
        xddot = self.basis.Pddot @ state.c_x
        yddot = self.basis.Pddot @ state.c_y
        state.d_a = np.minimum(np.sqrt(xddot**2 + yddot**2), batch.a_max)
        return state.d_a

    def update_multipliers(self, state: AmState, batch: ProblemBatch) -> None:
        """Gradient-style multiplier update on the current residuals."""
        r_x, r_y = self._residual_parts(state, batch)
        Fa_T = self.mats.F_axis.T
        state.lambda_x -= batch.rho_xy * (Fa_T @ r_x)
        state.lambda_y -= batch.rho_xy * (Fa_T @ r_y)
        xdot = self.basis.Pdot @ state.c_x
        ydot = self.basis.Pdot @ state.c_y
        theta = np.unwrap(np.arctan2(ydot, xdot), axis=0)
        # Same descent direction as the xy update: lambda -= rho * B^T (B c - target).
        state.lambda_psi -= batch.rho_xy * (self.basis.P.T @ (self.basis.P @ state.c_psi - theta))

    def _residual_parts(self, state: AmState, batch: ProblemBatch):
        P, Pdot, Pddot = self.basis.P, self.basis.Pdot, self.basis.Pddot
        return kernels.residual_vectors(
            P @ state.c_x, P @ state.c_y,
            Pdot @ state.c_x, Pdot @ state.c_y,
            Pddot @ state.c_x, Pddot @ state.c_y,
            P @ state.c_psi,
            batch.xi_x, batch.xi_y,
            state.alpha, state.d, state.alpha_a, state.d_a, state.v,
            batch.a, batch.b,
        )

    def compute_residuals(self, state: AmState, batch: ProblemBatch) -> Residuals:
        r_x, r_y = self._residual_parts(state, batch)
        return self._residual_norms(r_x, r_y, batch)

    def _residual_norms(self, r_x, r_y, batch) -> Residuals:
        mn = batch.xi_x.shape[0]
        n = self.basis.grid.n

        def block_norm(lo, hi):
            return np.sqrt(
                np.einsum("ij,ij->j", r_x[lo:hi], r_x[lo:hi])
                + np.einsum("ij,ij->j", r_y[lo:hi], r_y[lo:hi])
            )

        return Residuals(
            r_obs=block_norm(0, mn),
            r_acc=block_norm(mn, mn + n),
            r_nonhol=block_norm(mn + n, mn + 2 * n),
        )

    # -- full solves ----------------------------------------------------------

    def solve(
        self,
        batch: ProblemBatch,
        max_iter: int = 150,
        tol: float = 1e-3,
        warm: AmState | None = None,
        record_iterates: bool = False,
        keep_multipliers: bool = False,
    ) -> tuple[AmState, SolveInfo]:
        """Run the alternating minimization until every instance's worst
        residual drops below ``tol`` or ``max_iter`` is reached."""
        if max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {max_iter}")
        state = self.init_state(batch, warm, keep_multipliers=keep_multipliers)
        history: list[Residuals] = []
        iterates = [] if record_iterates else None
        converged = False
        g_x, g_y = self._g_parts(state, batch)
        for _ in range(max_iter):
            res, g_x, g_y = self._iterate(state, batch, g_x, g_y)
            history.append(res)
            if iterates is not None:
                iterates.append((state.c_x.copy(), state.c_y.copy(), state.c_psi.copy()))
            if res.overall_max() <= tol:
                converged = True
                break
        # The hot loop never consumes the angle arrays, so they are
        # materialized once here to keep the returned state complete.
        P = self.basis.P
        x = P @ state.c_x
        y = P @ state.c_y
        state.alpha, state.d = kernels.obstacle_update(
            x, y, batch.xi_x, batch.xi_y, batch.a, batch.b
        )
        xddot = self.basis.Pddot @ state.c_x
        yddot = self.basis.Pddot @ state.c_y
        state.alpha_a, state.d_a = kernels.accel_update(xddot, yddot, batch.a_max)
        return state, SolveInfo(
            residual_history=history,
            iterations=state.iteration,
            converged=converged,
            iterates=iterates,
        )

    def _iterate(
        self, state: AmState, batch: ProblemBatch, g_x: np.ndarray, g_y: np.ndarray
    ) -> tuple[Residuals, np.ndarray, np.ndarray]:
        """One full sweep: coefficient QPs, closed-form blocks, multipliers.

        ``g_x``/``g_y`` are the penalty targets of the incoming state (what
        :meth:`build_g` would return for it); the fused tail returns the
        residual vectors together with the next iteration's targets so the
        trigonometric work is done once per element per iteration.
        """
        P = self.basis.P
        n = self.basis.grid.n
        l = batch.l

        self._apply_xy(state, batch, g_x, g_y)

        samples = self._sample_all @ np.concatenate([state.c_x, state.c_y], axis=1)
        x, xdot, xddot = samples[:n, :l], samples[n : 2 * n, :l], samples[2 * n :, :l]
        y, ydot, yddot = samples[:n, l:], samples[n : 2 * n, l:], samples[2 * n :, l:]
        theta = np.unwrap(np.arctan2(ydot, xdot), axis=0)
        self._apply_psi(state, batch, theta)
        psi = P @ state.c_psi

        (
            state.d, state.d_a, state.v, r_x, r_y, g_x2, g_y2, sq_obs, sq_acc, sq_nonhol,
        ) = kernels.tail_core(
            np.ascontiguousarray(x), np.ascontiguousarray(y),
            np.ascontiguousarray(xdot), np.ascontiguousarray(ydot),
            np.ascontiguousarray(xddot), np.ascontiguousarray(yddot), psi,
            batch.xi_x, batch.xi_y,
            batch.v_min, batch.v_max, batch.a_max, batch.a, batch.b,
        )

        lam_step = self.mats.F_axis.T @ np.concatenate([r_x, r_y], axis=1)
        state.lambda_x -= batch.rho_xy * lam_step[:, :l]
        state.lambda_y -= batch.rho_xy * lam_step[:, l:]
        state.lambda_psi -= batch.rho_xy * (P.T @ (psi - theta))

        state.iteration += 1
        res = Residuals(
            r_obs=np.sqrt(sq_obs), r_acc=np.sqrt(sq_acc), r_nonhol=np.sqrt(sq_nonhol)
        )
        return res, g_x2, g_y2
