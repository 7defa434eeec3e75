"""Shared pytest fixtures."""

import math

import pytest

from dbdsim.exact import SolverConfig
from dbdsim.pulses import preset
from dbdsim.repo import SMatrixRepo
from dbdsim.units import SpatialGrid


@pytest.fixture
def small_grid():
    """Coarse grid for fast exact-solver tests (dp = 1/64, |p| <= 32)."""
    return SpatialGrid(n_points=2 ** 12, length=128 * math.pi)


@pytest.fixture
def small_solver(small_grid):
    """Solver on the coarse grid without gravity."""
    return SolverConfig(grid=small_grid, dt=0.002, g=0.0)


@pytest.fixture
def repo():
    """Create an empty S-matrix repository."""
    return SMatrixRepo()


@pytest.fixture
def c_dbd():
    return preset("C-DBD")


@pytest.fixture
def cd_dbd():
    return preset("CD-DBD")


@pytest.fixture
def ds_dbd():
    return preset("DS-DBD")


@pytest.fixture(scope="session")
def oct_mirror(tmp_path_factory):
    """Mirror re-optimized once per session from the DS-DBD sweep, seed 0."""
    from dbdsim.models import RunConfig
    from dbdsim.scans import cmd_optimize_mirror
    path = tmp_path_factory.mktemp("oct") / "oct_mirror.csv"
    return cmd_optimize_mirror(RunConfig(seed=0), str(path), budget=5000)


@pytest.fixture
def oct_preset(oct_mirror):
    return preset("OCT", oct_mirror.profile_path)
