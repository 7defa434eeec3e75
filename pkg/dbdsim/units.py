"""Recoil units, spatial grids, wave packets and momentum-port readout.

All quantities are expressed in recoil units: hbar = k_L = omega_rec = 1, so
the atomic mass is 1/2. Momentum is measured in hbar*k_L, time in 1/omega_rec,
length in 1/k_L, energy in hbar*omega_rec and acceleration in
omega_rec**2/k_L.
"""

import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Tuple

import numpy as np
from scipy import fft

from .errors import ConfigError, GridError


@dataclass(frozen=True)
class RecoilFrame:
    """The recoil unit system; ``mass`` follows from omega_rec = hbar k_L^2 / 2m."""
    hbar: float = 1.0
    k_L: float = 1.0
    omega_rec: float = 1.0

    @property
    def mass(self) -> float:
        return self.hbar * self.k_L ** 2 / (2.0 * self.omega_rec)


RECOIL = RecoilFrame()
HBAR = RECOIL.hbar
K_L = RECOIL.k_L
MASS = RECOIL.mass

# Port order matches the five-level basis {p, p+2, p-2, p+4, p-4}
PORT_OFFSETS = (0.0, 2.0, -2.0, 4.0, -4.0)
PORT_HALF_WIDTH = 1.0
MIN_POINTS_PER_SIGMA = 8
DB_FLOOR = -60.0


class Representation(Enum):
    POSITION = "position"
    MOMENTUM = "momentum"


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform periodic grid of ``n_points`` over [-length/2, length/2).

    The lattice term cos(2 k_L z) only couples grid momenta exactly when
    2 hbar k_L is an integer multiple of dp, so ``length`` must be an integer
    multiple of pi.
    """
    n_points: int = 2 ** 15
    length: float = 1024 * math.pi

    def __post_init__(self):
        n = self.n_points
        if n < 2 or n & (n - 1):
            raise GridError(f"n_points must be a power of two, got {n}")
        if self.length <= 0:
            raise GridError("grid length must be positive")
        lattice_steps = 2.0 * K_L / self.dp
        if abs(lattice_steps - round(lattice_steps)) > 1e-9 * lattice_steps:
            raise GridError(
                f"grid length {self.length:.6g} is not a multiple of pi; "
                f"the lattice momentum 2 hbar k_L is not on the momentum grid"
            )

    @classmethod
    def default(cls) -> "SpatialGrid":
        return cls()

    @property
    def dz(self) -> float:
        return self.length / self.n_points

    @property
    def dp(self) -> float:
        return 2.0 * math.pi * HBAR / self.length

    @property
    def z_min(self) -> float:
        return -0.5 * self.length

    @property
    def z_max(self) -> float:
        return 0.5 * self.length - self.dz

    @property
    def p_max(self) -> float:
        """Largest representable momentum magnitude."""
        return math.pi * HBAR / self.dz

    @cached_property
    def z(self) -> np.ndarray:
        z = self.z_min + self.dz * np.arange(self.n_points)
        z.setflags(write=False)
        return z

    @cached_property
    def p(self) -> np.ndarray:
        """Momenta in FFT order (not shifted)."""
        p = 2.0 * math.pi * HBAR * fft.fftfreq(self.n_points, d=self.dz)
        p.setflags(write=False)
        return p

    @cached_property
    def _origin_phase(self) -> np.ndarray:
        phase = np.exp(-1j * self.p * self.z_min / HBAR)
        phase.setflags(write=False)
        return phase


@dataclass(frozen=True, eq=False)
class WavePacket:
    """Complex amplitudes on a grid, tagged with their representation.

    Position amplitudes are normalized as sum |psi|^2 dz = 1, momentum
    amplitudes as sum |phi|^2 dp = 1. The amplitude array is read-only.
    """
    amplitudes: np.ndarray
    grid: SpatialGrid
    representation: Representation

    def __post_init__(self):
        amplitudes = np.array(self.amplitudes, dtype=complex)
        if amplitudes.shape != (self.grid.n_points,):
            raise GridError(
                f"amplitudes have shape {amplitudes.shape}, grid needs "
                f"({self.grid.n_points},)"
            )
        amplitudes.setflags(write=False)
        object.__setattr__(self, "amplitudes", amplitudes)

    @property
    def step(self) -> float:
        if self.representation is Representation.POSITION:
            return self.grid.dz
        return self.grid.dp

    @property
    def density(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def norm(self) -> float:
        """Squared L2 norm (total probability)."""
        return float(np.sum(self.density) * self.step)


def to_momentum(w: WavePacket) -> WavePacket:
    """Discrete Fourier transform to the momentum representation."""
    if w.representation is Representation.MOMENTUM:
        return w
    grid = w.grid
    phi = grid.dz / math.sqrt(2.0 * math.pi * HBAR) * grid._origin_phase * fft.fft(w.amplitudes)
    return WavePacket(phi, grid, Representation.MOMENTUM)


def to_position(w: WavePacket) -> WavePacket:
    """Inverse of :func:`to_momentum`."""
    if w.representation is Representation.POSITION:
        return w
    grid = w.grid
    psi = math.sqrt(2.0 * math.pi * HBAR) / grid.dz * fft.ifft(w.amplitudes * np.conj(grid._origin_phase))
    return WavePacket(psi, grid, Representation.POSITION)


def make_gaussian_packet(p0: float, sigma_p: float, grid: SpatialGrid) -> WavePacket:
    """Gaussian momentum distribution N(p0, sigma_p^2), centered at z = 0.

    Args:
        p0: Mean momentum in hbar k_L
        sigma_p: Momentum standard deviation in hbar k_L
        grid: Grid to sample on

    Returns:
        Normalized packet in the momentum representation
    """
    if sigma_p <= 0:
        raise ConfigError("sigma_p must be positive")
    if abs(p0) + 5.0 * sigma_p >= K_L * HBAR:
        raise ConfigError(
            f"packet (p0={p0}, sigma_p={sigma_p}) is not compactly supported "
            f"in the first Brillouin zone"
        )
    if sigma_p / grid.dp < MIN_POINTS_PER_SIGMA:
        raise GridError(
            f"grid too coarse for sigma_p = {sigma_p}: dp = {grid.dp:.3g} gives "
            f"{sigma_p / grid.dp:.2f} points per std, need {MIN_POINTS_PER_SIGMA}"
        )
    phi = np.exp(-((grid.p - p0) ** 2) / (4.0 * sigma_p ** 2)).astype(complex)
    phi /= math.sqrt(np.sum(np.abs(phi) ** 2) * grid.dp)
    return WavePacket(phi, grid, Representation.MOMENTUM)


def make_momentum_eigenstate(p: float, grid: SpatialGrid) -> WavePacket:
    """All amplitude in the single momentum bin nearest to ``p``."""
    index = int(np.argmin(np.abs(grid.p - p)))
    if abs(grid.p[index] - p) > 0.5 * grid.dp:
        raise GridError(f"momentum {p} is outside the grid (|p| <= {grid.p_max:.4g})")
    phi = np.zeros(grid.n_points, dtype=complex)
    phi[index] = 1.0 / math.sqrt(grid.dp)
    return WavePacket(phi, grid, Representation.MOMENTUM)


def boost(w: WavePacket, dk: float) -> WavePacket:
    """Shift all momenta by ``dk`` (multiplication by exp(i dk z / hbar))."""
    psi = to_position(w)
    boosted = WavePacket(psi.amplitudes * np.exp(1j * dk * w.grid.z / HBAR), w.grid, Representation.POSITION)
    return boosted if w.representation is Representation.POSITION else to_momentum(boosted)


def translate(w: WavePacket, shift: float) -> WavePacket:
    """Shift the packet in position by ``shift``."""
    phi = to_momentum(w)
    moved = WavePacket(phi.amplitudes * np.exp(-1j * w.grid.p * shift / HBAR), w.grid, Representation.MOMENTUM)
    return moved if w.representation is Representation.MOMENTUM else to_position(moved)


def momentum_moments(w: WavePacket) -> Tuple[float, float]:
    """Mean and standard deviation of the momentum distribution."""
    phi = to_momentum(w)
    return _moments(phi.grid.p, phi.density * phi.grid.dp)


def position_moments(w: WavePacket) -> Tuple[float, float]:
    """Mean and standard deviation of the position distribution."""
    psi = to_position(w)
    return _moments(psi.grid.z, psi.density * psi.grid.dz)


def _moments(x: np.ndarray, weights: np.ndarray) -> Tuple[float, float]:
    total = np.sum(weights)
    mean = np.sum(x * weights) / total
    var = np.sum((x - mean) ** 2 * weights) / total
    return float(mean), float(math.sqrt(max(var, 0.0)))


def port_populations(w: WavePacket, center_shift: float = 0.0) -> np.ndarray:
    """Populations of the five momentum ports.

    Bins of half-width 1 hbar k_L are centered at ``center_shift`` plus
    {0, +2, -2, +4, -4} hbar k_L, in that order.
    """
    phi = to_momentum(w)
    grid = phi.grid
    if grid.p_max < abs(center_shift) + max(PORT_OFFSETS) + PORT_HALF_WIDTH:
        raise GridError(
            f"momentum extent +-{grid.p_max:.4g} cannot hold the port bins "
            f"around {center_shift:.4g}"
        )
    weights = phi.density * grid.dp
    populations = np.empty(len(PORT_OFFSETS))
    for i, offset in enumerate(PORT_OFFSETS):
        center = center_shift + offset
        mask = (grid.p >= center - PORT_HALF_WIDTH) & (grid.p < center + PORT_HALF_WIDTH)
        populations[i] = np.sum(weights[mask])
    return populations


def density_db(density: np.ndarray, reference_max: float, floor: float = DB_FLOOR) -> np.ndarray:
    """Density in dB relative to ``reference_max``, clipped at ``floor``."""
    with np.errstate(divide="ignore"):
        db = 10.0 * np.log10(np.asarray(density) / reference_max)
    return np.maximum(db, floor)


def quasi_momentum(p: float) -> float:
    """Fold a momentum into the first Brillouin zone [-1, 1) hbar k_L."""
    return (p + K_L * HBAR) % (2.0 * K_L * HBAR) - K_L * HBAR
