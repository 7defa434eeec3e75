"""Light pulses: Gaussian envelopes, detuning profiles and strategy presets."""

from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Optional, Tuple, Union

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ConfigError, ProfileRequiredError
from .logger import logger
from .models import Strategy
from .units import RECOIL

ArrayLike = Union[float, np.ndarray]

# Envelopes are exactly zero beyond +-TRUNCATION * tau from their center
TRUNCATION = 5.0
# First-order double Bragg resonance, 4 omega_rec
BRAGG_RESONANCE = 4.0 * RECOIL.omega_rec


@dataclass(frozen=True)
class GaussianEnvelope:
    """Omega(t) = omega_peak * exp(-(t - t0)^2 / 2 tau^2), truncated at 10 tau."""
    omega_peak: float
    tau: float
    t0: float = 0.0

    def __post_init__(self):
        if self.omega_peak < 0:
            raise ConfigError("omega_peak must not be negative")
        if self.tau <= 0:
            raise ConfigError("tau must be positive")

    @property
    def window(self) -> Tuple[float, float]:
        half = TRUNCATION * self.tau
        return self.t0 - half, self.t0 + half

    def value(self, t: ArrayLike) -> ArrayLike:
        s = np.asarray(t, dtype=float) - self.t0
        inside = np.abs(s) <= TRUNCATION * self.tau
        out = np.where(inside, self.omega_peak * np.exp(-s ** 2 / (2.0 * self.tau ** 2)), 0.0)
        return float(out) if out.ndim == 0 else out


def envelope_value(e: GaussianEnvelope, t: ArrayLike) -> ArrayLike:
    """Rabi frequency of ``e`` at time(s) ``t``."""
    return e.value(t)


class DetuningProfile:
    """Detuning Delta(t) from the Bragg resonance, in omega_rec."""

    def value(self, t: ArrayLike, envelope: GaussianEnvelope) -> ArrayLike:
        raise NotImplementedError


@dataclass(frozen=True)
class ZeroDetuning(DetuningProfile):
    def value(self, t, envelope):
        return np.zeros_like(np.asarray(t, dtype=float)) + 0.0


@dataclass(frozen=True)
class ConstantDetuning(DetuningProfile):
    delta: float

    def value(self, t, envelope):
        return np.zeros_like(np.asarray(t, dtype=float)) + self.delta


@dataclass(frozen=True)
class LinearSweep(DetuningProfile):
    """Delta(t) = (alpha / tau) (t - t0) + beta."""
    alpha: float
    beta: float

    def value(self, t, envelope):
        s = np.asarray(t, dtype=float) - envelope.t0
        return self.alpha / envelope.tau * s + self.beta


@dataclass(frozen=True)
class SampledDetuning(DetuningProfile):
    """Natural cubic spline through (times, values), zero outside the samples.

    Sample times live on the window-local axis t~ = t - t0 + 5 tau, which runs
    over [0, 10 tau] across the truncation window of the owning envelope.
    """
    times: Tuple[float, ...]
    values: Tuple[float, ...]

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        values = tuple(float(v) for v in self.values)
        if len(times) != len(values):
            raise ConfigError("sampled detuning needs as many values as times")
        if len(times) < 2:
            raise ConfigError("sampled detuning needs at least two samples")
        if not all(np.isfinite(times)) or not all(np.isfinite(values)):
            raise ConfigError("sampled detuning contains non-finite numbers")
        if np.any(np.diff(times) <= 0):
            raise ConfigError("sample times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @cached_property
    def spline(self) -> CubicSpline:
        return CubicSpline(self.times, self.values, bc_type="natural")

    @staticmethod
    def local_time(t: ArrayLike, envelope: GaussianEnvelope) -> np.ndarray:
        return np.asarray(t, dtype=float) - envelope.t0 + TRUNCATION * envelope.tau

    def value(self, t, envelope):
        s = self.local_time(t, envelope)
        inside = (s >= self.times[0]) & (s <= self.times[-1])
        return np.where(inside, self.spline(np.clip(s, self.times[0], self.times[-1])), 0.0)


@dataclass(frozen=True)
class PulseSpec:
    """One double Bragg light pulse."""
    envelope: GaussianEnvelope
    detuning: DetuningProfile = field(default_factory=ZeroDetuning)
    eps_pol: float = 0.0
    label: str = ""

    def __post_init__(self):
        if not 0.0 <= self.eps_pol <= 0.2:
            raise ConfigError(f"eps_pol = {self.eps_pol} outside [0, 0.2]")

    @property
    def window(self) -> Tuple[float, float]:
        return self.envelope.window

    @property
    def center(self) -> float:
        return self.envelope.t0

    def rabi(self, t: ArrayLike) -> ArrayLike:
        return self.envelope.value(t)

    def laser_phase(self, t: ArrayLike) -> ArrayLike:
        return laser_phase(self, t)

    def coupling(self, t: ArrayLike) -> ArrayLike:
        """Omega(t) [cos Phi_L(t) + eps_pol], the lattice matrix element."""
        return self.rabi(t) * (np.cos(self.laser_phase(t)) + self.eps_pol)

    def centered_at(self, t0: float) -> "PulseSpec":
        return replace(self, envelope=replace(self.envelope, t0=t0))

    def scaled(self, factor: float) -> "PulseSpec":
        """Same pulse with its peak lattice depth multiplied by ``factor``."""
        return replace(self, envelope=replace(self.envelope, omega_peak=self.envelope.omega_peak * factor))

    def with_eps_pol(self, eps_pol: float) -> "PulseSpec":
        return replace(self, eps_pol=eps_pol)


def laser_phase(p: PulseSpec, t: ArrayLike) -> ArrayLike:
    """Laser phase difference, zero at the pulse center.

    Phi_L(t) = Delta_omega(t) (t - t0) with Delta_omega(t) = 4 omega_rec + Delta(t).
    The instantaneous frequency difference multiplies the elapsed time; for a
    swept detuning this is not the running integral of Delta.
    """
    s = np.asarray(t, dtype=float) - p.envelope.t0
    phase = (BRAGG_RESONANCE + p.detuning.value(t, p.envelope)) * s
    return float(phase) if np.ndim(phase) == 0 else phase


@dataclass(frozen=True)
class StrategyPreset:
    """Beam-splitter and mirror pulses of a BS-M-BS sequence."""
    name: Strategy
    bs: PulseSpec
    mirror: PulseSpec

    @property
    def min_interrogation_time(self) -> float:
        """Shortest T for which the three pulse windows do not overlap."""
        return TRUNCATION * (self.bs.envelope.tau + self.mirror.envelope.tau)

    def with_eps_pol(self, eps_pol: float) -> "StrategyPreset":
        return replace(self, bs=self.bs.with_eps_pol(eps_pol), mirror=self.mirror.with_eps_pol(eps_pol))


C_DBD_BS = GaussianEnvelope(omega_peak=2.0, tau=0.47)
C_DBD_MIRROR = GaussianEnvelope(omega_peak=2.89, tau=0.64)
OCT_MIRROR = GaussianEnvelope(omega_peak=2.502, tau=1.829, t0=3.879)

CD_DBD_BS_DETUNING = ConstantDetuning(0.27)
DS_DBD_BS_SWEEP = LinearSweep(alpha=0.37, beta=0.315)
DS_DBD_MIRROR_SWEEP = LinearSweep(alpha=0.75, beta=-4.0)


def preset(name: Union[str, Strategy], profile_path: Optional[str] = None,
           eps_pol: float = 0.0) -> StrategyPreset:
    """Tabulated pulse parameters of a detuning-control strategy.

    Args:
        name: Strategy or its display name (C-DBD, CD-DBD, DS-DBD, OCT)
        profile_path: Detuning profile file of the OCT mirror
        eps_pol: Polarization error applied to every pulse

    Returns:
        The strategy's beam-splitter and mirror pulses
    """
    strategy = name if isinstance(name, Strategy) else Strategy.parse(name)

    if strategy is Strategy.C_DBD:
        bs = PulseSpec(C_DBD_BS, ZeroDetuning(), eps_pol, "C-DBD BS")
        mirror = PulseSpec(C_DBD_MIRROR, ZeroDetuning(), eps_pol, "C-DBD M")
    elif strategy is Strategy.CD_DBD:
        bs = PulseSpec(C_DBD_BS, CD_DBD_BS_DETUNING, eps_pol, "CD-DBD BS")
        mirror = PulseSpec(C_DBD_MIRROR, ConstantDetuning(0.0), eps_pol, "CD-DBD M")
    elif strategy is Strategy.DS_DBD:
        bs = PulseSpec(C_DBD_BS, DS_DBD_BS_SWEEP, eps_pol, "DS-DBD BS")
        mirror = PulseSpec(C_DBD_MIRROR, DS_DBD_MIRROR_SWEEP, eps_pol, "DS-DBD M")
    else:
        if profile_path is None:
            raise ProfileRequiredError(
                "profile required: the OCT preset needs a detuning profile file "
                "(create one with 'dbdsim optimize-mirror')"
            )
        from .storage import load_mirror_pulse
        bs = PulseSpec(C_DBD_BS, DS_DBD_BS_SWEEP, eps_pol, "OCT BS")
        mirror = replace(load_mirror_pulse(profile_path), eps_pol=eps_pol, label="OCT M")

    logger.debug(f"Loaded preset {strategy.value}")
    return StrategyPreset(strategy, bs, mirror)
