"""Exact 1-D evolution under the double Bragg Hamiltonian.

Pulses are stepped with second-order Strang splitting on the spatial grid;
free fall between pulses uses the analytic momentum-space propagator. Runs can
be done in the co-moving (COM) frame of the twin lattices, with effective
acceleration g, or in the laboratory frame with a Doppler ramp of the lattice
phase.
"""

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import fft

from .errors import BoundaryContactError, GridError, SequenceError
from .logger import logger
from .models import PulseKind
from .pulses import PulseSpec, StrategyPreset
from .units import (
    HBAR, K_L, MASS, Representation, SpatialGrid, WavePacket, boost,
    density_db, make_gaussian_packet, port_populations, quasi_momentum,
    to_momentum, to_position, translate,
)

# Momentum density below this fraction counts as outside the packet support
SUPPORT_THRESHOLD = 1e-12
# Boundary density is checked every this many split-operator steps
BOUNDARY_CHECK_EVERY = 200


class Frame(Enum):
    COM = "com"
    LAB = "lab"


@dataclass(frozen=True)
class SolverConfig:
    """Settings of an exact run.

    ``g`` is the effective acceleration g - a_L in the COM frame and the
    laboratory acceleration in the LAB frame, where ``a_L`` is the
    acceleration of the twin lattices. ``eps_pol``, when set, overrides the
    polarization error of every pulse.
    """
    grid: SpatialGrid = field(default_factory=SpatialGrid)
    dt: float = 0.002
    g: float = 0.0
    frame: Frame = Frame.COM
    a_L: float = 0.0
    eps_pol: Optional[float] = None
    boundary_points: int = 4
    boundary_tolerance: float = 1e-8

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")

    @property
    def g_eff(self) -> float:
        """Acceleration felt in the twin-lattice frame."""
        return self.g - self.a_L if self.frame is Frame.LAB else self.g


@dataclass(frozen=True)
class PulseSequence:
    """Pulses placed on the time axis with non-overlapping windows."""
    pulses: Tuple[PulseSpec, ...]

    def __post_init__(self):
        pulses = tuple(sorted(self.pulses, key=lambda p: p.center))
        for earlier, later in zip(pulses, pulses[1:]):
            if earlier.window[1] > later.window[0]:
                raise SequenceError(
                    f"pulse windows overlap: {earlier.label or 'pulse'} ends at "
                    f"{earlier.window[1]:.6g}, {later.label or 'pulse'} starts at "
                    f"{later.window[0]:.6g}"
                )
        object.__setattr__(self, "pulses", pulses)

    @classmethod
    def mach_zehnder(cls, preset: StrategyPreset, T: float,
                     pulses: Optional[Sequence[PulseSpec]] = None) -> "PulseSequence":
        """BS at 0, mirror at T, BS at 2T.

        ``pulses`` may replace the (bs, mirror, bs) triple, e.g. with
        individually rescaled lattice depths.
        """
        if T < preset.min_interrogation_time:
            raise SequenceError(
                f"T = {T:.6g} is shorter than the pulse windows allow "
                f"(T >= {preset.min_interrogation_time:.6g})"
            )
        bs1, mirror, bs2 = pulses or (preset.bs, preset.mirror, preset.bs)
        return cls((bs1.centered_at(0.0), mirror.centered_at(T), bs2.centered_at(2.0 * T)))

    @property
    def start(self) -> float:
        return self.pulses[0].window[0]

    @property
    def end(self) -> float:
        return self.pulses[-1].window[1]

    def active(self, t: float) -> Optional[PulseSpec]:
        """The pulse whose window contains ``t``, if any."""
        for pulse in self.pulses:
            a, b = pulse.window
            if a <= t <= b:
                return pulse
        return None


@dataclass(frozen=True)
class MovieOptions:
    """Snapshot spacing (time) and spatial decimation of a density movie."""
    every: float = 1.0
    z_stride: int = 16


@dataclass
class DensityMovie:
    """|psi(z,t)|^2 snapshots in dB relative to the initial maximum."""
    times: np.ndarray
    z: np.ndarray
    db: np.ndarray


@dataclass
class ExactResult:
    """Port populations of an exact run (ports ordered 0, +2, -2, +4, -4)."""
    populations: np.ndarray
    norm: float
    center_shift: float
    movie: Optional[DensityMovie] = None

    @property
    def conjugate(self) -> float:
        """P_{+-2 hbar k} = P_2 + P_3."""
        return float(self.populations[1] + self.populations[2])


def _pulse_eps(pulse: PulseSpec, config: SolverConfig) -> float:
    return pulse.eps_pol if config.eps_pol is None else config.eps_pol


def _lattice_amplitude(pulse: Optional[PulseSpec], t, config: SolverConfig):
    """2 hbar Omega(t) [cos Phi_L(t) + eps_pol]; zero between pulses."""
    if pulse is None:
        return np.zeros_like(np.asarray(t, dtype=float))
    eps = _pulse_eps(pulse, config)
    return 2.0 * HBAR * pulse.rabi(t) * (np.cos(pulse.laser_phase(t)) + eps)


def potential_com(z: np.ndarray, t: float, seq: PulseSequence, g: float,
                  eps_pol: Optional[float] = None) -> np.ndarray:
    """V(z,t) = 2 hbar Omega(t) cos(2 k_L z) [cos Phi_L(t) + eps_pol] - m g z."""
    config = SolverConfig(g=g, eps_pol=eps_pol)
    a = float(_lattice_amplitude(seq.active(t), t, config))
    return a * np.cos(2.0 * K_L * z) - MASS * g * z


def potential_lab(z: np.ndarray, t: float, seq: PulseSequence, g: float, a_L: float,
                  eps_pol: Optional[float] = None) -> np.ndarray:
    """Laboratory-frame potential; the lattice phase carries int nu_D dt = k_L a_L t^2."""
    config = SolverConfig(g=g, eps_pol=eps_pol, frame=Frame.LAB, a_L=a_L)
    a = float(_lattice_amplitude(seq.active(t), t, config))
    return a * np.cos(2.0 * K_L * z - K_L * a_L * t ** 2) - MASS * g * z


def potential(z: np.ndarray, t: float, seq: PulseSequence, config: SolverConfig) -> np.ndarray:
    if config.frame is Frame.LAB:
        return potential_lab(z, t, seq, config.g, config.a_L, config.eps_pol)
    return potential_com(z, t, seq, config.g, config.eps_pol)


def step_strang(w: WavePacket, t: float, dt: float, config: SolverConfig,
                seq: PulseSequence) -> WavePacket:
    """One Strang step exp(-iV dt/2) exp(-iK dt) exp(-iV dt/2), V at t + dt/2."""
    grid = w.grid
    psi = to_position(w).amplitudes
    half = np.exp(-0.5j * dt / HBAR * potential(grid.z, t + 0.5 * dt, seq, config))
    kinetic = np.exp(-1j * dt * grid.p ** 2 / (2.0 * MASS * HBAR))
    psi = half * fft.ifft(kinetic * fft.fft(half * psi))
    return WavePacket(psi, grid, Representation.POSITION)


def free_phase(p: np.ndarray, duration: float, g: float) -> np.ndarray:
    """exp(-i (m g T^2 p + T p^2) / (2 m hbar)); the T^3 global phase is dropped."""
    return np.exp(-1j * (MASS * g * duration ** 2 * p + duration * p ** 2) / (2.0 * MASS * HBAR))


def evolve_free(w: WavePacket, duration: float, g: float) -> WavePacket:
    """Exact free fall: |p> -> U(p) |p + m g T>."""
    grid = w.grid
    phi = fft.fft(to_position(w).amplitudes)
    _check_support(phi, grid, MASS * g * duration)
    psi = fft.ifft(phi * free_phase(grid.p, duration, g)) * np.exp(1j * MASS * g * duration * grid.z / HBAR)
    out = WavePacket(psi, grid, Representation.POSITION)
    return out if w.representation is Representation.POSITION else to_momentum(out)


def _check_support(phi_raw: np.ndarray, grid: SpatialGrid, shift: float):
    weights = np.abs(phi_raw) ** 2
    support = grid.p[weights > SUPPORT_THRESHOLD * weights.sum()]
    if support.size and max(abs(support.max() + shift), abs(support.min() + shift)) > grid.p_max:
        raise GridError(
            f"momentum shift {shift:.4g} pushes the packet outside the grid "
            f"(|p| <= {grid.p_max:.4g})"
        )


class _Evolver:
    """Propagates position amplitudes through a pulse sequence."""

    def __init__(self, config: SolverConfig, seq: PulseSequence, movie: Optional[MovieOptions] = None):
        self.config = config
        self.seq = seq
        self.grid = config.grid
        z = self.grid.z
        self.cos2z = np.cos(2.0 * K_L * z)
        self.sin2z = np.sin(2.0 * K_L * z) if config.frame is Frame.LAB else None
        self.movie = movie
        self.frames: List[Tuple[float, np.ndarray]] = []
        self.reference_max: Optional[float] = None

    def lattice(self, a: float, t: float) -> np.ndarray:
        if self.config.frame is Frame.LAB:
            theta = K_L * self.config.a_L * t ** 2
            return a * (self.cos2z * math.cos(theta) + self.sin2z * math.sin(theta))
        return a * self.cos2z

    def pulse_window(self, psi: np.ndarray, pulse: PulseSpec) -> np.ndarray:
        t_a, t_b = pulse.window
        n_steps = max(1, int(math.ceil((t_b - t_a) / self.config.dt - 1e-9)))
        dt = (t_b - t_a) / n_steps
        t_mid = t_a + dt * (np.arange(n_steps) + 0.5)
        amplitudes = _lattice_amplitude(pulse, t_mid, self.config)
        kinetic = np.exp(-1j * dt * self.grid.p ** 2 / (2.0 * MASS * HBAR))
        gravity_half = np.exp(0.5j * dt * MASS * self.config.g * self.grid.z / HBAR)
        gravity_full = gravity_half ** 2
        snapshot_every = self._snapshot_steps(dt)

        psi = psi * np.exp(-0.5j * dt / HBAR * self.lattice(amplitudes[0], t_mid[0])) * gravity_half
        for k in range(n_steps):
            psi = fft.ifft(kinetic * fft.fft(psi))
            if k + 1 < n_steps:
                fused = self.lattice(amplitudes[k], t_mid[k]) + self.lattice(amplitudes[k + 1], t_mid[k + 1])
                psi = psi * np.exp(-0.5j * dt / HBAR * fused) * gravity_full
                t_now = t_a + (k + 1) * dt
                if snapshot_every and (k + 1) % snapshot_every == 0:
                    # half-kick ahead of t_now; good enough for a display frame
                    self.snapshot(t_now, psi)
                if (k + 1) % BOUNDARY_CHECK_EVERY == 0:
                    self.check_boundary(t_now, psi)
            else:
                psi = psi * np.exp(-0.5j * dt / HBAR * self.lattice(amplitudes[k], t_mid[k])) * gravity_half
        self.check_boundary(t_b, psi)
        logger.debug(f"Stepped {pulse.label or 'pulse'} over [{t_a:.4g}, {t_b:.4g}] in {n_steps} steps")
        return psi

    def free(self, psi: np.ndarray, t_a: float, t_b: float) -> np.ndarray:
        if t_b <= t_a:
            return psi
        marks = [t_a, t_b]
        if self.movie is not None:
            marks = list(np.arange(t_a, t_b, self.movie.every)) + [t_b]
        for start, stop in zip(marks, marks[1:]):
            w = evolve_free(WavePacket(psi, self.grid, Representation.POSITION), stop - start, self.config.g)
            psi = np.array(w.amplitudes)
            if self.movie is not None and stop < t_b:
                self.snapshot(stop, psi)
        self.check_boundary(t_b, psi)
        return psi

    def _snapshot_steps(self, dt: float) -> int:
        if self.movie is None:
            return 0
        return max(1, int(round(self.movie.every / dt)))

    def snapshot(self, t: float, psi: np.ndarray):
        if self.movie is None:
            return
        density = np.abs(psi[::self.movie.z_stride]) ** 2
        if self.reference_max is None:
            self.reference_max = float(density.max())
        self.frames.append((t, density_db(density, self.reference_max)))

    def check_boundary(self, t: float, psi: np.ndarray):
        n = self.config.boundary_points
        edge = max(np.max(np.abs(psi[:n]) ** 2), np.max(np.abs(psi[-n:]) ** 2))
        if edge > self.config.boundary_tolerance:
            logger.error(f"Wave packet reached the grid edge at t = {t:.6g}")
            raise BoundaryContactError(t, float(edge))

    def run(self, psi: np.ndarray) -> np.ndarray:
        self.snapshot(self.seq.start, psi)
        t = self.seq.start
        for pulse in self.seq.pulses:
            psi = self.free(psi, t, pulse.window[0])
            psi = self.pulse_window(psi, pulse)
            t = pulse.window[1]
        self.snapshot(t, psi)
        return psi

    def movie_result(self) -> Optional[DensityMovie]:
        if self.movie is None:
            return None
        times = np.array([t for t, _ in self.frames])
        db = np.array([row for _, row in self.frames])
        return DensityMovie(times, np.array(self.grid.z[::self.movie.z_stride]), db)


def to_lab_frame(w: WavePacket, t: float, a_L: float) -> WavePacket:
    """Apply U(t)^dagger: COM-frame state to laboratory frame at time t."""
    moved = translate(w, 0.5 * a_L * t ** 2)
    return boost(moved, MASS * a_L * t)


def from_lab_frame(w: WavePacket, t: float, a_L: float) -> WavePacket:
    """Apply U(t): laboratory-frame state to the COM frame at time t."""
    slowed = boost(w, -MASS * a_L * t)
    return translate(slowed, -0.5 * a_L * t ** 2)


def run_sequence(config: SolverConfig, seq: PulseSequence, packet: WavePacket,
                 movie: Optional[MovieOptions] = None) -> ExactResult:
    """Evolve ``packet`` (given in the COM frame at the sequence start)."""
    if packet.grid != config.grid:
        raise GridError("packet and solver use different grids")
    evolver = _Evolver(config, seq, movie)
    start = packet
    if config.frame is Frame.LAB:
        start = to_lab_frame(packet, seq.start, config.a_L)
    psi = np.array(to_position(start).amplitudes)
    psi = evolver.run(psi)
    out = WavePacket(psi, config.grid, Representation.POSITION)
    if config.frame is Frame.LAB:
        out = from_lab_frame(out, seq.end, config.a_L)
    center_shift = MASS * config.g_eff * (seq.end - seq.start)
    populations = port_populations(out, center_shift)
    return ExactResult(populations, out.norm(), center_shift, evolver.movie_result())


def run_pulse_exact(config: SolverConfig, pulse: PulseSpec, packet: WavePacket) -> ExactResult:
    """Apply a single pulse (centered at t = 0) and read the ports."""
    return run_sequence(config, PulseSequence((pulse.centered_at(0.0),)), packet)


def run_mz_exact(config: SolverConfig, preset: StrategyPreset, T: float, packet: WavePacket,
                 movie: Optional[MovieOptions] = None,
                 pulses: Optional[Sequence[PulseSpec]] = None) -> ExactResult:
    """Full BS(0) - M(T) - BS(2T) sequence followed by momentum readout.

    Args:
        config: Solver settings (frame, grid, dt, acceleration)
        preset: Strategy pulses
        T: Interrogation time
        packet: Initial state at the start of the first pulse window
        movie: Record a density movie when given
        pulses: Optional replacement (bs, mirror, bs) triple

    Returns:
        Port populations around the shift m g_eff (t_end - t_start)
    """
    seq = PulseSequence.mach_zehnder(preset, T, pulses)
    result = run_sequence(config, seq, packet, movie)
    logger.info(
        f"Exact {preset.name.value} run at T = {T:.6g}: "
        f"P = {np.array2string(result.populations, precision=5)}"
    )
    return result


def run_lab_frame(config: SolverConfig, preset: StrategyPreset, T: float, packet: WavePacket,
                  movie: Optional[MovieOptions] = None) -> ExactResult:
    """Laboratory-frame run; populations read in the COM-frame port bins."""
    if config.frame is not Frame.LAB:
        config = replace(config, frame=Frame.LAB)
    return run_mz_exact(config, preset, T, packet, movie)


def exact_efficiency(pulse: PulseSpec, kind: PulseKind, p0: float, sigma_p: float,
                     config: Optional[SolverConfig] = None) -> float:
    """Pulse efficiency for a Gaussian packet from the exact solver.

    Beam-splitters start from N(p0, sigma_p^2) and count P_{+2} + P_{-2};
    mirrors start from the same packet boosted to p0 + 2 and count P_{-2}.
    """
    config = config or SolverConfig()
    packet = make_gaussian_packet(quasi_momentum(p0), sigma_p, config.grid)
    if kind is PulseKind.M:
        packet = boost(packet, 2.0 * K_L * HBAR)
    result = run_pulse_exact(config, pulse, packet)
    if kind is PulseKind.BS:
        return result.conjugate
    return float(result.populations[2])
