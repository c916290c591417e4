"""Numeric property checks of the alternating-minimization blocks."""

import numpy as np


def penalty(solver, state, batch):
    g = solver.build_g(state, batch)
    stacked = np.vstack([state.c_x, state.c_y])
    r = solver.mats.F @ stacked - g
    return np.sum(r * r)


class TestBlockDescent:
    """Each closed-form block must not increase the penalty it minimizes,
    checked along real solve trajectories of the canonical batch."""

    def run_iterations(self, solver, batch, steps, iters=15):
        state = solver.init_state(batch)
        records = []
        for _ in range(iters):
            solver.step_xy(state, batch)
            solver.step_psi(state, batch)
            solver.step_v(state, batch)
            before = penalty(solver, state, batch)
            steps(solver, state, batch)
            after = penalty(solver, state, batch)
            records.append((before, after))
            solver.step_alpha_acc(state, batch)
            solver.step_d_acc(state, batch)
            solver.update_multipliers(state, batch)
        return records

    def test_obstacle_pair_descends(self, solver, demo_batch):
        def steps(s, st, b):
            s.step_alpha_obs(st, b)
            s.step_d_obs(st, b)

        for before, after in self.run_iterations(solver, demo_batch, steps):
            assert after <= before + 1e-9

    def test_acceleration_pair_descends(self, solver, demo_batch):
        state = solver.init_state(demo_batch)
        for _ in range(15):
            solver.step_xy(state, demo_batch)
            solver.step_psi(state, demo_batch)
            solver.step_v(state, demo_batch)
            solver.step_alpha_obs(state, demo_batch)
            solver.step_d_obs(state, demo_batch)
            before = penalty(solver, state, demo_batch)
            solver.step_alpha_acc(state, demo_batch)
            solver.step_d_acc(state, demo_batch)
            after = penalty(solver, state, demo_batch)
            assert after <= before + 1e-9
            solver.update_multipliers(state, demo_batch)

    def test_speed_block_descends_on_canonical_solve(self, solver, demo_batch):
        state = solver.init_state(demo_batch)
        for _ in range(15):
            solver.step_xy(state, demo_batch)
            solver.step_psi(state, demo_batch)
            before = penalty(solver, state, demo_batch)
            solver.step_v(state, demo_batch)
            after = penalty(solver, state, demo_batch)
            assert after <= before + 1e-9
            solver.step_alpha_obs(state, demo_batch)
            solver.step_d_obs(state, demo_batch)
            solver.step_alpha_acc(state, demo_batch)
            solver.step_d_acc(state, demo_batch)
            solver.update_multipliers(state, demo_batch)

    def test_xy_step_minimizes_its_quadratic(self, solver, demo_batch, rng):
        """The coefficient QP value at the solution is below the value at
        random feasible perturbations (feasibility = boundary rows kept)."""
        state = solver.init_state(demo_batch)
        g = solver.build_g(state, demo_batch)
        solver.step_xy(state, demo_batch)
        mats = solver.mats

        def qp_value(cx, cy):
            stacked = np.vstack([cx, cy])
            quad = 0.5 * np.einsum("ij,ij->j", cx, mats.Q @ cx) + 0.5 * np.einsum(
                "ij,ij->j", cy, mats.Q @ cy
            )
            lin = -np.einsum("ij,ij->j", state.lambda_x, cx) - np.einsum(
                "ij,ij->j", state.lambda_y, cy
            )
            r = mats.F @ stacked - g
            return quad + lin + 0.5 * demo_batch.rho_xy * np.einsum("ij,ij->j", r, r)

        base = qp_value(state.c_x, state.c_y)
        null = null_space_of(mats.A)
        for _ in range(5):
            w = rng.normal(0, 0.1, (null.shape[1], demo_batch.l))
            dz = null @ w
            cx = state.c_x + dz[: solver.basis.n_b]
            cy = state.c_y + dz[solver.basis.n_b :]
            assert np.all(qp_value(cx, cy) >= base - 1e-7)


def null_space_of(A):
    from scipy.linalg import null_space

    return null_space(A)


class TestClosedFormOptimality:
    def test_obstacle_update_zeroes_penalty_outside(self, solver, demo_batch):
        """Outside every ellipse the polar pair reproduces the position
        exactly, so the obstacle block of the penalty collapses to zero."""
        state = solver.init_state(demo_batch)
        solver.step_xy(state, demo_batch)
        solver.step_alpha_obs(state, demo_batch)
        solver.step_d_obs(state, demo_batch)
        res = solver.compute_residuals(state, demo_batch)
        unclipped = state.d > 1.0
        if unclipped.all():
            assert res.r_obs.max() <= 1e-9

    def test_penalty_trend_across_iterations(self, solver, demo_batch):
        """The multiplier updates drive the block-consistent penalty down
        across iterations (monitored trend, not per-step monotonicity)."""
        state = solver.init_state(demo_batch)
        values = []
        for _ in range(10):
            solver.step_xy(state, demo_batch)
            solver.step_psi(state, demo_batch)
            solver.step_v(state, demo_batch)
            solver.step_alpha_obs(state, demo_batch)
            solver.step_d_obs(state, demo_batch)
            solver.step_alpha_acc(state, demo_batch)
            solver.step_d_acc(state, demo_batch)
            values.append(penalty(solver, state, demo_batch))
            solver.update_multipliers(state, demo_batch)
        assert values[-1] < 0.6 * values[0]


class TestConvergenceBehavior:
    def test_residual_reaches_paper_range(self, solver, demo_batch):
        _, info = solver.solve(demo_batch, max_iter=150, tol=0.0)
        finals = info.residual_history[-1].max_per_instance()
        assert finals.min() <= 1e-3

    def test_early_stop_on_tolerance(self, solver, basis):
        """An all-easy batch (empty road, straight goals) stops well before
        max_iter."""
        from batchmpc.solver import ProblemBatch

        n = basis.grid.n
        xi = np.full(n * 10, 1e4)
        b_xy = np.zeros((12, 3))
        for i in range(3):
            b_xy[:, i] = [0, 15, 0, 150, 15, 0, 4, 0, 0, 4, 0, 0]
        batch = ProblemBatch(
            l=3, xi_x=xi, xi_y=xi, a=5.6, b=3.1, v_min=0.1, v_max=20.0, a_max=8.0,
            b_xy=b_xy, b_psi=np.zeros((4, 3)),
        )
        _, info = solver.solve(batch, max_iter=150, tol=1e-3)
        assert info.converged
        assert info.iterations < 20
