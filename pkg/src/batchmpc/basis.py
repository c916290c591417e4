"""Time grid, Bernstein basis matrices, and batch-independent constant matrices.

Everything built here depends only on the problem *shape* (horizon, sample
count, basis degree, obstacle count, boundary layout), never on a particular
problem instance, so one construction is shared read-only by every solve.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import comb


@dataclass(frozen=True)
class TimeGrid:
    """Uniform sampling of the planning horizon [t0, tf]."""

    t0: float
    tf: float
    n: int
    dt: float
    times: np.ndarray

    def __post_init__(self):
        self.times.setflags(write=False)


def build_time_grid(t0: float, tf: float, n: int) -> TimeGrid:
    """Uniform grid with ``n`` samples; endpoints are hit exactly."""
    if n < 2:
        raise ValueError(f"need at least 2 samples, got n={n}")
    if not tf > t0:
        raise ValueError(f"degenerate horizon: tf={tf} must exceed t0={t0}")
    times = np.linspace(t0, tf, n)
    return TimeGrid(t0=float(t0), tf=float(tf), n=int(n), dt=(tf - t0) / (n - 1), times=times)


@dataclass(frozen=True)
class BasisSet:
    """Bernstein basis values and time derivatives sampled on a grid.

    ``P[i, k]`` is the k-th degree-``n_b - 1`` Bernstein polynomial at
    ``grid.times[i]``; ``Pdot``/``Pddot`` hold the first/second time
    derivatives. Rows of ``P`` sum to one (partition of unity) and the
    endpoint rows are unit vectors, which makes boundary rows trivial.
    """

    grid: TimeGrid
    P: np.ndarray
    Pdot: np.ndarray
    Pddot: np.ndarray
    n_b: int

    def __post_init__(self):
        for m in (self.P, self.Pdot, self.Pddot):
            m.setflags(write=False)


def _bernstein_rows(u: np.ndarray, degree: int) -> np.ndarray:
    """Rows of all degree-``degree`` Bernstein polynomials at points u in [0, 1]."""
    k = np.arange(degree + 1)
    u = u[:, None]
    return comb(degree, k) * u**k * (1.0 - u) ** (degree - k)


def build_basis(grid: TimeGrid, degree: int = 10) -> BasisSet:
    """Sample the Bernstein basis of the given degree on the grid.

    Derivatives come from the exact degree-lowering recurrence, scaled by
    the horizon length, so ``Pdot @ c`` and ``Pddot @ c`` are the true
    derivatives of ``P @ c`` (not finite differences).
    """
    if degree < 3:
        raise ValueError(f"degree must be >= 3, got {degree}")
    span = grid.tf - grid.t0
    u = (grid.times - grid.t0) / span
    n_b = degree + 1

    P = _bernstein_rows(u, degree)

    lower1 = _bernstein_rows(u, degree - 1)
    dP = np.zeros_like(P)
    dP[:, :-1] -= lower1
    dP[:, 1:] += lower1
    dP *= degree

    lower2 = _bernstein_rows(u, degree - 2)
    ddP = np.zeros_like(P)
    ddP[:, :-2] += lower2
    ddP[:, 1:-1] -= 2.0 * lower2
    ddP[:, 2:] += lower2
    ddP *= degree * (degree - 1)

    return BasisSet(grid=grid, P=P, Pdot=dP / span, Pddot=ddP / span**2, n_b=n_b)


@dataclass(frozen=True)
class BoundarySpec:
    """Which derivative orders are pinned at each end of the horizon.

    The defaults pin position, velocity and acceleration of x and y at both
    ends (goals are position/velocity/acceleration tuples at the horizon
    end), and heading plus heading rate at both ends.
    """

    start_orders: tuple[int, ...] = (0, 1, 2)
    end_orders: tuple[int, ...] = (0, 1, 2)
    psi_start_orders: tuple[int, ...] = (0, 1)
    psi_end_orders: tuple[int, ...] = (0, 1)

    @property
    def rows_per_axis(self) -> int:
        return len(self.start_orders) + len(self.end_orders)

    @property
    def rows_psi(self) -> int:
        return len(self.psi_start_orders) + len(self.psi_end_orders)

    def row_index(self, end: str, order: int) -> int:
        """Row of the per-axis boundary block pinning ``order`` at ``end``."""
        if end == "t0":
            return self.start_orders.index(order)
        if end == "tf":
            return len(self.start_orders) + self.end_orders.index(order)
        raise ValueError(f"end must be 't0' or 'tf', got {end!r}")


@dataclass(frozen=True)
class ConstantMatrices:
    """All constant matrices of the reformulated problem.

    ``F_axis`` stacks [F_o; Pddot; Pdot] for one axis; ``F`` is its
    two-block diagonal for the stacked (x, y) coefficient vector. ``A``
    carries the boundary rows for both axes, ``A_psi`` those for heading.
    None of these depend on the batch instance.
    """

    basis: BasisSet
    m: int
    boundary: BoundarySpec
    F_o: np.ndarray
    F_axis: np.ndarray
    F: np.ndarray
    Q: np.ndarray
    A: np.ndarray
    A_axis: np.ndarray
    A_psi: np.ndarray
    rows_obs: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "rows_obs", self.m * self.basis.grid.n)
        for mat in (self.F_o, self.F_axis, self.F, self.Q, self.A, self.A_axis, self.A_psi):
            mat.setflags(write=False)


def _boundary_rows(basis: BasisSet, orders_start, orders_end) -> np.ndarray:
    by_order = (basis.P, basis.Pdot, basis.Pddot)
    rows = [by_order[o][0] for o in orders_start]
    rows += [by_order[o][-1] for o in orders_end]
    return np.array(rows)


def build_constant_matrices(
    basis: BasisSet, m: int, boundary: BoundarySpec | None = None
) -> ConstantMatrices:
    """Assemble F_o, F, Q and the boundary matrices for ``m`` obstacles.

    ``m = 0`` is allowed and simply drops the obstacle rows from F.
    """
    if m < 0:
        raise ValueError(f"obstacle count must be >= 0, got {m}")
    boundary = boundary or BoundarySpec()
    n, n_b = basis.grid.n, basis.n_b

    F_o = np.tile(basis.P, (m, 1))
    F_axis = np.vstack([F_o, basis.Pddot, basis.Pdot])
    F = np.zeros((2 * F_axis.shape[0], 2 * n_b))
    F[: F_axis.shape[0], :n_b] = F_axis
    F[F_axis.shape[0] :, n_b:] = F_axis

    Q = basis.Pddot.T @ basis.Pddot

    A_axis = _boundary_rows(basis, boundary.start_orders, boundary.end_orders)
    A = np.zeros((2 * A_axis.shape[0], 2 * n_b))
    A[: A_axis.shape[0], :n_b] = A_axis
    A[A_axis.shape[0] :, n_b:] = A_axis
    A_psi = _boundary_rows(basis, boundary.psi_start_orders, boundary.psi_end_orders)

    if np.linalg.matrix_rank(A_axis) < A_axis.shape[0]:
        raise ValueError(
            f"boundary matrix is rank deficient ({A_axis.shape[0]} rows, basis size {n_b}); "
            "raise the basis degree or pin fewer orders"
        )

    return ConstantMatrices(
        basis=basis, m=m, boundary=boundary,
        F_o=F_o, F_axis=F_axis, F=F, Q=Q, A=A, A_axis=A_axis, A_psi=A_psi,
    )
