"""Mach-Zehnder composition, port populations, T-scans and contrast.

The full interferometer acts on a quasi-momentum family as

    S_tot(p) = B(p3) U(p2) M(p2) U(p1) B(p1),
    p1 = p, p2 = p + m g T, p3 = p + 2 m g T,

where U is the diagonal free propagator over T. Port populations average
|S_tot[i, 0]|^2 over the Gaussian momentum distribution with Gauss-Legendre
quadrature.
"""

import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.signal import find_peaks

from .errors import (
    ConfigError, ExtremumError, ModelRangeError, QuadratureError, SequenceError,
    UndersampledError,
)
from .five_level import basis, check_zone, gaussian_nodes, pulse_smatrices
from .logger import logger
from .models import Engine, ScanAxis
from .pulses import PulseSpec, StrategyPreset
from .repo import SMatrixRepo
from .units import HBAR, K_L, MASS, quasi_momentum
from .workers import parallel_map

# Adjacent samples of the fringe phase 4 k_L g T^2 must differ by less than this
MAX_PHASE_STEP = math.pi / 8.0
# Fringe phases below this belong to the trivial T -> 0 region
TRIVIAL_PHASE = math.pi / 2.0
# Fraction of the signal's peak-to-peak range a fringe extremum must stand out by
MIN_PROMINENCE = 0.2


def free_propagator_diag(p, T: float, g: float, levels: int = 5) -> np.ndarray:
    """diag[U(p + 2n hbar k_L)] with U(q) = exp(-i (m g T^2 q + T q^2) / (2 m hbar))."""
    n = np.array(basis(levels))
    q = np.asarray(p, dtype=float)[..., None] + 2.0 * HBAR * K_L * n
    return np.exp(-1j * (MASS * g * T ** 2 * q + T * q ** 2) / (2.0 * MASS * HBAR))


def ideal_bs(levels: int = 5) -> np.ndarray:
    """Lossless 50/50 splitter: |p> -> -i(|p+2> + |p-2>)/sqrt(2), dark state untouched."""
    s = np.eye(levels, dtype=complex)
    r = 1.0 / math.sqrt(2.0)
    s[0, 0] = 0.0
    s[1, 0] = s[2, 0] = s[0, 1] = s[0, 2] = -1j * r
    s[1, 1] = s[2, 2] = 0.5
    s[1, 2] = s[2, 1] = -0.5
    return s


def ideal_mirror(levels: int = 5) -> np.ndarray:
    """Perfect swap: |p+-2> -> -|p-+2>, |p> -> -|p>."""
    s = np.eye(levels, dtype=complex)
    s[0, 0] = -1.0
    s[1, 1] = s[2, 2] = 0.0
    s[1, 2] = s[2, 1] = -1.0
    return s


@dataclass(frozen=True)
class MZConfig:
    """Physical setup of one Mach-Zehnder evaluation."""
    preset: StrategyPreset
    g: float = 0.000357
    T: float = 60.0
    p0: float = 0.0
    sigma_p: float = 0.05
    eps_pol: float = 0.0
    nodes: int = 65
    levels: int = 5
    ideal_pulses: bool = False
    depth_factors: Tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        if len(self.depth_factors) != 3 or min(self.depth_factors) < 0:
            raise ConfigError("depth_factors needs three non-negative factors (BS1, M, BS2)")
        if self.sigma_p <= 0:
            raise ConfigError("sigma_p must be positive")
        if self.T <= 0:
            raise ConfigError("T must be positive")
        basis(self.levels)
        check_zone(self.p_center, self.sigma_p)

    @property
    def pulses(self) -> StrategyPreset:
        return self.preset.with_eps_pol(self.eps_pol)

    @property
    def sequence_pulses(self) -> Tuple[PulseSpec, PulseSpec, PulseSpec]:
        """(BS1, M, BS2) with eps_pol applied and peak depths scaled."""
        preset = self.pulses
        f1, f2, f3 = self.depth_factors
        return preset.bs.scaled(f1), preset.mirror.scaled(f2), preset.bs.scaled(f3)

    @property
    def p_center(self) -> float:
        return quasi_momentum(self.p0)

    @property
    def t_floor(self) -> float:
        return self.preset.min_interrogation_time


def _check_range(p: np.ndarray):
    outside = np.abs(p) >= HBAR * K_L
    if np.any(outside):
        worst = float(p[outside][np.argmax(np.abs(p[outside]))])
        logger.error(f"Quasi-momentum {worst:.6g} left the first Brillouin zone")
        raise ModelRangeError(worst)


def _compose(config: MZConfig, p: np.ndarray, T: np.ndarray,
             repo: Optional[SMatrixRepo]) -> np.ndarray:
    """S_tot for quasi-momenta ``p`` (n,) and times ``T`` (m,); shape (m, n, L, L)."""
    shift = MASS * config.g * T[:, None]
    p1 = np.broadcast_to(p[None, :], (T.size, p.size))
    p2 = p1 + shift
    p3 = p1 + 2.0 * shift
    _check_range(p3)
    _check_range(p2)
    levels = config.levels
    if config.ideal_pulses:
        b1 = b3 = ideal_bs(levels)
        m = ideal_mirror(levels)
    else:
        bs1, mirror, bs2 = config.sequence_pulses
        fetch = repo.get_many if repo is not None else pulse_smatrices
        shape = p1.shape + (levels, levels)
        b1 = np.broadcast_to(fetch(bs1, p, levels)[None], shape)
        m = fetch(mirror, p2.ravel(), levels).reshape(shape)
        b3 = fetch(bs2, p3.ravel(), levels).reshape(shape)
    u1 = free_propagator_diag(p1, T[:, None, None], config.g, levels)
    u2 = free_propagator_diag(p2, T[:, None, None], config.g, levels)
    # diagonal propagators act as row scalings
    inner = u1[..., :, None] * b1
    inner = np.matmul(m, inner)
    inner = u2[..., :, None] * inner
    return np.matmul(b3, inner)


def total_smatrix(g: float, p: float, T: float, preset: StrategyPreset,
                  repo: Optional[SMatrixRepo] = None, levels: int = 5,
                  ideal_pulses: bool = False) -> np.ndarray:
    """Full interferometer S-matrix at a single quasi-momentum."""
    config = MZConfig(preset, g=g, T=T, p0=0.0, levels=levels, ideal_pulses=ideal_pulses)
    return _compose(config, np.array([float(p)]), np.array([float(T)]), repo)[0, 0]


def _populations(config: MZConfig, T: np.ndarray, nodes: int,
                 repo: Optional[SMatrixRepo]) -> np.ndarray:
    p, weights = gaussian_nodes(config.p_center, config.sigma_p, nodes)
    s = _compose(config, p, T, repo)
    return np.einsum("n,mni->mi", weights, np.abs(s[..., :, 0]) ** 2)


def port_populations_5ls(config: MZConfig, repo: Optional[SMatrixRepo] = None,
                         check_convergence: bool = True, tol: float = 1e-5) -> np.ndarray:
    """P_i(g, T) = int |psi(p)|^2 |S_tot[i, 0](p)|^2 dp for all output levels.

    The first five entries are the ports (0, +2, -2, +4, -4); a 7-level
    configuration appends the +-6 levels. When ``check_convergence`` is set
    the quadrature is repeated with twice the nodes.
    """
    if config.T < config.t_floor:
        raise SequenceError(f"T = {config.T:.6g} is shorter than the pulse windows allow")
    T = np.array([config.T])
    populations = _populations(config, T, config.nodes, repo)[0]
    if check_convergence:
        fine = _populations(config, T, 2 * config.nodes, repo)[0]
        if np.max(np.abs(fine - populations)) > tol:
            raise QuadratureError(
                f"port populations changed by {np.max(np.abs(fine - populations)):.3g} "
                f"on node doubling"
            )
        populations = fine
    return populations


@dataclass
class FringeSignal:
    """T-scan of the conjugate port P_{+-2} = P_2 + P_3 and of P_1."""
    T: np.ndarray
    conjugate: np.ndarray
    P1: np.ndarray
    populations: Optional[np.ndarray] = None
    metadata: Dict[str, str] = field(default_factory=dict)
    g: Optional[float] = None

    @property
    def leakage(self) -> np.ndarray:
        """Probability lost to levels outside the five ports."""
        if self.populations is None:
            return 1.0 - self.conjugate - self.P1
        return 1.0 - self.populations.sum(axis=1)


def required_points(g: float, T_min: float, T_max: float) -> int:
    """Smallest number of samples keeping phase steps below pi/8."""
    span = 8.0 * abs(g) * T_max * (T_max - T_min)
    return int(math.floor(span / MAX_PHASE_STEP)) + 2


def t_scan(config: MZConfig, T_min: float, T_max: float, n_points: int,
           repo: Optional[SMatrixRepo] = None, engine: Engine = Engine.FIVE_LEVEL,
           solver=None, workers: int = 1) -> FringeSignal:
    """Sample the interferometer signal over [T_min, T_max].

    Args:
        config: Setup; its ``T`` is ignored
        T_min: First interrogation time, at least the pulse-window minimum
        T_max: Last interrogation time
        n_points: Number of samples
        repo: S-matrix cache for the five-level engine
        engine: FIVE_LEVEL or EXACT
        solver: ``SolverConfig`` of the exact engine
        workers: Threads sharing the T samples

    Returns:
        The sampled fringe
    """
    if n_points < 3 or T_max <= T_min:
        raise ConfigError("a T-scan needs T_max > T_min and at least 3 points")
    if T_min < config.t_floor:
        raise SequenceError(
            f"T_min = {T_min:.6g} is shorter than the pulse windows allow "
            f"(T >= {config.t_floor:.6g})"
        )
    needed = required_points(config.g, T_min, T_max)
    if n_points < needed:
        logger.error(f"T-scan with {n_points} points is undersampled")
        raise UndersampledError(needed)

    T = np.linspace(T_min, T_max, n_points)
    chunks = [c for c in np.array_split(T, max(1, min(workers, n_points))) if c.size]
    if engine is Engine.EXACT:
        parts = parallel_map(lambda c: _exact_populations(config, c, solver), chunks, workers)
    else:
        repo = repo if repo is not None else SMatrixRepo()
        if workers > 1:
            # first-pulse matrices do not depend on T
            _populations(config, T[:1], config.nodes, repo)
        parts = parallel_map(lambda c: _populations(config, c, config.nodes, repo), chunks, workers)
    populations = np.concatenate(parts, axis=0)
    metadata = {
        "strategy": config.preset.name.value,
        "engine": engine.value,
        "g": repr(config.g),
        "sigma_p": repr(config.sigma_p),
        "p0": repr(config.p0),
        "eps_pol": repr(config.eps_pol),
    }
    logger.info(f"T-scan of {config.preset.name.value} over [{T_min:.4g}, {T_max:.4g}] "
                f"with {n_points} points ({engine.value})")
    return FringeSignal(T, populations[:, 1] + populations[:, 2], populations[:, 0],
                        populations[:, :5], metadata, config.g)


def _exact_populations(config: MZConfig, T: np.ndarray, solver) -> np.ndarray:
    from .exact import SolverConfig, run_mz_exact
    from .units import make_gaussian_packet

    solver = solver or SolverConfig()
    solver = replace(solver, g=config.g)
    packet = make_gaussian_packet(config.p_center, config.sigma_p, solver.grid)
    rows = [run_mz_exact(solver, config.pulses, float(t), packet,
                         pulses=config.sequence_pulses).populations for t in T]
    return np.array(rows)


@dataclass(frozen=True)
class ContrastResult:
    """First non-trivial fringe maximum and minimum and their difference."""
    contrast: float
    offset: float
    T_max: float
    T_min: float
    P_max: float
    P_min: float


def _refine(T: np.ndarray, P: np.ndarray, i: int) -> Tuple[float, float]:
    """Vertex of the parabola through samples i-1, i, i+1."""
    t = T[i - 1:i + 2]
    y = P[i - 1:i + 2]
    a, b, c = np.polyfit(t - t[1], y, 2)
    if a == 0.0:
        return float(t[1]), float(y[1])
    x = -b / (2.0 * a)
    x = min(max(x, t[0] - t[1]), t[2] - t[1])
    return float(t[1] + x), float(np.polyval((a, b, c), x))


def trivial_region_end(g: Optional[float]) -> float:
    """Largest T whose fringe phase 4 k_L g T^2 is still below TRIVIAL_PHASE."""
    if not g:
        return 0.0
    return math.sqrt(TRIVIAL_PHASE / (4.0 * K_L * abs(g)))


def extract_contrast(signal: FringeSignal, T_start: Optional[float] = None,
                     prominence: float = MIN_PROMINENCE) -> ContrastResult:
    """Contrast from the first fringe maximum and the following minimum of P_{+-2}(T).

    Samples before ``T_start`` and, when the signal knows its acceleration,
    inside the trivial region 4 k_L g T^2 < pi/2 are ignored. Extrema must
    stand out by ``prominence`` times the peak-to-peak range of what is left,
    which skips the short-T ripple of parasitic paths and flat plateaus. Each
    extremum is refined by a three-point quadratic fit.
    """
    T = np.asarray(signal.T, dtype=float)
    P = np.asarray(signal.conjugate, dtype=float)
    floor = max(T_start or -np.inf, trivial_region_end(signal.g))
    keep = T >= floor
    T, P = T[keep], P[keep]
    if T.size < 3 or np.ptp(P) == 0.0:
        raise ExtremumError("no fringe maximum bracketed by the scan")
    threshold = prominence * float(np.ptp(P))
    peaks, _ = find_peaks(P, prominence=threshold)
    if peaks.size == 0:
        raise ExtremumError("no fringe maximum bracketed by the scan")
    i_max = int(peaks[0])
    troughs, _ = find_peaks(-P, prominence=threshold)
    troughs = troughs[troughs > i_max]
    if troughs.size == 0:
        raise ExtremumError("no fringe minimum bracketed after the first maximum")
    i_min = int(troughs[0])
    T_max, P_max = _refine(T, P, i_max)
    T_min, P_min = _refine(T, P, i_min)
    contrast = P_max - P_min
    logger.debug(f"Contrast {contrast:.5f} from T_max={T_max:.4g}, T_min={T_min:.4g}")
    return ContrastResult(contrast, P_max + P_min, T_max, T_min, P_max, P_min)


@dataclass(frozen=True)
class CosineFit:
    """P ~ (A - C cos(4 k_L g T^2 + phi)) / 2 and the RMS residual."""
    offset: float
    contrast: float
    phase: float
    rms: float


def fit_single_cosine(signal: FringeSignal, g: float) -> CosineFit:
    """Least-squares fit of the single Fourier component at 4 k_L g T^2."""
    theta = 4.0 * K_L * g * np.asarray(signal.T) ** 2
    design = np.column_stack([np.ones_like(theta), np.cos(theta), np.sin(theta)])
    coef, *_ = np.linalg.lstsq(design, signal.conjugate, rcond=None)
    residual = signal.conjugate - design @ coef
    a0, a1, a2 = coef
    return CosineFit(
        offset=float(2.0 * a0),
        contrast=float(2.0 * math.hypot(a1, a2)),
        phase=float(math.atan2(a2, -a1)),
        rms=float(np.sqrt(np.mean(residual ** 2))),
    )


@dataclass
class ContrastRow:
    value: float
    contrast: float
    offset: float
    exact_contrast: Optional[float] = None


def contrast_scan(template: MZConfig, axis: ScanAxis, values: Sequence[float],
                  T_max: float = 80.0, n_points: int = 161,
                  repo: Optional[SMatrixRepo] = None, engine: Engine = Engine.FIVE_LEVEL,
                  solver=None, T_min: Optional[float] = None, workers: int = 1) -> List[ContrastRow]:
    """Contrast of one strategy while sweeping sigma_p, p0 or eps_pol.

    The five-level engine always runs; ``Engine.EXACT`` or ``Engine.BOTH``
    add the exact solver's contrast to every row. Values are spread over
    ``workers`` threads; rows keep the order of ``values``.
    """
    repo = repo if repo is not None else SMatrixRepo()
    T_min = template.t_floor if T_min is None else T_min

    def one(value: float) -> ContrastRow:
        config = replace(template, **{axis.value: float(value)})
        signal = t_scan(config, T_min, T_max, n_points, repo)
        result = extract_contrast(signal)
        row = ContrastRow(float(value), result.contrast, result.offset)
        if engine in (Engine.EXACT, Engine.BOTH):
            exact = t_scan(config, T_min, T_max, n_points, engine=Engine.EXACT, solver=solver)
            row.exact_contrast = extract_contrast(exact).contrast
        logger.info(f"{template.preset.name.value} {axis.value}={value:.4g}: C={result.contrast:.5f}")
        return row

    return parallel_map(one, list(values), workers)


def interrogation_time_for_phase(g: float, phase: float, T_floor: float = 0.0) -> float:
    """Smallest T >= T_floor with 4 k_L g T^2 = phase (mod 2 pi)."""
    if g <= 0:
        raise ConfigError("g must be positive")
    phase = phase % (2.0 * math.pi)
    k = max(0, math.ceil((4.0 * K_L * g * T_floor ** 2 - phase) / (2.0 * math.pi) - 1e-12))
    return math.sqrt((phase + 2.0 * math.pi * k) / (4.0 * K_L * g))


def relative_improvement(contrast: float, reference: float) -> float:
    """Relative contrast gain over a reference strategy."""
    if reference <= 0:
        raise ConfigError("reference contrast must be positive")
    return contrast / reference - 1.0


def ideal_fringe(T: Union[float, np.ndarray], g: float) -> Union[float, np.ndarray]:
    """(1 - cos(4 k_L g T^2)) / 2."""
    return 0.5 * (1.0 - np.cos(4.0 * K_L * g * np.asarray(T) ** 2))
