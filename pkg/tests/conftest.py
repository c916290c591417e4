import sys
from pathlib import Path

import numpy as np
import pytest

REPO = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(REPO / "src"))

from batchmpc import build_basis, build_constant_matrices, build_time_grid
from batchmpc.solver import BatchSolver


@pytest.fixture(scope="session")
def grid():
    return build_time_grid(0.0, 10.0, 100)


@pytest.fixture(scope="session")
def basis(grid):
    return build_basis(grid, 10)


@pytest.fixture(scope="session")
def mats(basis):
    return build_constant_matrices(basis, 10)


@pytest.fixture(scope="session")
def solver(basis, mats):
    return BatchSolver(basis, mats, rho_xy=1.0)


@pytest.fixture(scope="session")
def demo_batch(solver):
    from batchmpc.oracles import make_demo_batch

    return make_demo_batch(solver, l=11, seed=0)


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)


def config_path(name: str) -> Path:
    return REPO / "configs" / name
