"""Tests for grids, wave packets and port readout."""

import math

import numpy as np
import pytest

from dbdsim.errors import ConfigError, GridError
from dbdsim.units import (
    MASS, Representation, SpatialGrid, WavePacket, boost, density_db,
    make_gaussian_packet, make_momentum_eigenstate, momentum_moments,
    port_populations, position_moments, quasi_momentum, to_momentum,
    to_position, translate,
)


def test_recoil_mass():
    """Test that recoil units fix the mass at 1/2."""
    assert MASS == 0.5


def test_default_grid():
    """Test the default grid geometry."""
    grid = SpatialGrid.default()
    assert grid.n_points == 2 ** 15
    assert grid.dp == pytest.approx(1.0 / 512)
    assert grid.p_max == pytest.approx(32.0)
    assert grid.z[0] == pytest.approx(-512 * math.pi)


def test_grid_rejects_non_power_of_two():
    """Test that the point count must be a power of two."""
    with pytest.raises(GridError):
        SpatialGrid(n_points=1000, length=128 * math.pi)


def test_grid_rejects_incommensurate_length():
    """Test that 2 hbar k_L must land on the momentum grid."""
    with pytest.raises(GridError):
        SpatialGrid(n_points=2 ** 12, length=400.0)


def test_grid_arrays_are_read_only(small_grid):
    """Test that cached coordinate arrays cannot be modified."""
    with pytest.raises(ValueError):
        small_grid.p[0] = 1.0


def test_wave_packet_shape_mismatch(small_grid):
    """Test that amplitudes must match the grid."""
    with pytest.raises(GridError):
        WavePacket(np.zeros(10), small_grid, Representation.POSITION)


def test_gaussian_packet_moments(small_grid):
    """Test normalization and momentum moments of a Gaussian packet."""
    packet = make_gaussian_packet(0.1, 0.15, small_grid)
    assert packet.norm() == pytest.approx(1.0, abs=1e-12)
    mean, std = momentum_moments(packet)
    assert mean == pytest.approx(0.1, abs=1e-9)
    assert std == pytest.approx(0.15, rel=1e-6)


def test_gaussian_packet_is_centered(small_grid):
    """Test that the packet sits at z = 0."""
    mean, std = position_moments(make_gaussian_packet(0.0, 0.15, small_grid))
    assert mean == pytest.approx(0.0, abs=1e-9)
    assert std == pytest.approx(1.0 / (2 * 0.15), rel=1e-4)


def test_gaussian_packet_too_coarse(small_grid):
    """Test that fewer than 8 points per sigma are rejected."""
    with pytest.raises(GridError):
        make_gaussian_packet(0.0, 0.05, small_grid)


@pytest.mark.parametrize("p0, sigma_p", [(0.0, -0.1), (0.5, 0.15), (0.0, 0.3)])
def test_gaussian_packet_invalid(small_grid, p0, sigma_p):
    """Test rejection of packets that leave the first Brillouin zone."""
    with pytest.raises(ConfigError):
        make_gaussian_packet(p0, sigma_p, small_grid)


def test_fourier_transforms_preserve_norm(small_grid):
    """Test that both representations carry the same probability."""
    packet = make_gaussian_packet(0.05, 0.15, small_grid)
    psi = to_position(packet)
    assert psi.representation is Representation.POSITION
    assert psi.norm() == pytest.approx(1.0, abs=1e-12)
    back = to_momentum(psi)
    assert np.allclose(back.amplitudes, packet.amplitudes, atol=1e-12)


def test_boost_shifts_momentum(small_grid):
    """Test that a boost by 2 hbar k_L moves the whole distribution."""
    packet = make_gaussian_packet(0.0, 0.15, small_grid)
    mean, _ = momentum_moments(boost(packet, 2.0))
    assert mean == pytest.approx(2.0, abs=1e-9)


def test_translate_shifts_position(small_grid):
    """Test that translate moves the packet in position."""
    packet = make_gaussian_packet(0.0, 0.15, small_grid)
    mean, _ = position_moments(translate(packet, 12.5))
    assert mean == pytest.approx(12.5, abs=1e-8)


def test_port_populations_of_rest_packet(small_grid):
    """Test that a packet at rest fills the central port only."""
    populations = port_populations(make_gaussian_packet(0.0, 0.15, small_grid))
    assert populations[0] == pytest.approx(1.0, abs=1e-10)
    assert populations[1:].sum() == pytest.approx(0.0, abs=1e-10)


def test_port_populations_order(small_grid):
    """Test that ports are ordered 0, +2, -2, +4, -4."""
    packet = make_gaussian_packet(0.0, 0.15, small_grid)
    assert port_populations(boost(packet, -2.0))[2] == pytest.approx(1.0, abs=1e-10)
    assert port_populations(boost(packet, 4.0))[3] == pytest.approx(1.0, abs=1e-10)


def test_port_populations_with_shift(small_grid):
    """Test that bins follow the readout shift."""
    packet = boost(make_gaussian_packet(0.0, 0.15, small_grid), 0.5)
    assert port_populations(packet, center_shift=0.5)[0] == pytest.approx(1.0, abs=1e-10)


def test_port_populations_outside_grid(small_grid):
    """Test that bins beyond the momentum extent are rejected."""
    with pytest.raises(GridError):
        port_populations(make_gaussian_packet(0.0, 0.15, small_grid), center_shift=30.0)


def test_momentum_eigenstate(small_grid):
    """Test the single-bin momentum state."""
    state = make_momentum_eigenstate(2.0, small_grid)
    assert state.norm() == pytest.approx(1.0)
    assert port_populations(state)[1] == pytest.approx(1.0)
    with pytest.raises(GridError):
        make_momentum_eigenstate(100.0, small_grid)


def test_density_db_floor():
    """Test dB conversion and the -60 dB floor."""
    db = density_db(np.array([1.0, 0.1, 0.0]), 1.0)
    assert db[0] == pytest.approx(0.0)
    assert db[1] == pytest.approx(-10.0)
    assert db[2] == -60.0


@pytest.mark.parametrize("p, expected", [(0.0, 0.0), (2.0, 0.0), (1.5, -0.5), (-0.3, -0.3), (2.1, 0.1)])
def test_quasi_momentum(p, expected):
    """Test folding into the first Brillouin zone."""
    assert quasi_momentum(p) == pytest.approx(expected)
