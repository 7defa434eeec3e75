"""Optimal control of the mirror pulse.

The mirror is parameterized by its Gaussian envelope and a natural cubic
spline through detuning knots spread evenly over the 10 tau window. The cost
is the swap infidelity |1 - |M_32|^2| + |1 - |M_23|^2| averaged over a set of
quasi-momenta, minimized with bounded Nelder-Mead and seeded restarts.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy.optimize import minimize

from .errors import ConfigError
from .five_level import pulse_smatrices
from .logger import logger
from .pulses import TRUNCATION, GaussianEnvelope, PulseSpec, SampledDetuning

OMEGA_BOUNDS = (1.0, 4.0)
TAU_BOUNDS = (0.4, 3.0)
KNOT_BOUNDS = (-8.0, 8.0)
DEFAULT_KNOTS = 16
MIN_BUDGET = 200
# Initial simplex edge as a fraction of each parameter's box
SIMPLEX_STEP = 0.02
# Restart spread as a fraction of each parameter's box
RESTART_SPREAD = 0.05


@dataclass(frozen=True)
class ControlParams:
    """Gaussian envelope plus detuning knots of a candidate mirror.

    Knots sit at evenly spaced times on the window-local axis
    t~ = t - t0 + 5 tau in [0, 10 tau], so they stretch with tau. ``t0`` only
    shifts the pulse in time and is not optimized.
    """
    omega_peak: float
    tau: float
    t0: float
    knots: Tuple[float, ...]

    def __post_init__(self):
        knots = tuple(float(k) for k in self.knots)
        object.__setattr__(self, "knots", knots)
        if len(knots) < 2:
            raise ConfigError("at least two detuning knots are required")
        if not OMEGA_BOUNDS[0] <= self.omega_peak <= OMEGA_BOUNDS[1]:
            raise ConfigError(f"omega_peak = {self.omega_peak} outside {OMEGA_BOUNDS}")
        if not TAU_BOUNDS[0] <= self.tau <= TAU_BOUNDS[1]:
            raise ConfigError(f"tau = {self.tau} outside {TAU_BOUNDS}")
        if any(not KNOT_BOUNDS[0] <= k <= KNOT_BOUNDS[1] for k in knots):
            raise ConfigError(f"detuning knots must lie in {KNOT_BOUNDS}")

    @property
    def knot_times(self) -> np.ndarray:
        return np.linspace(0.0, 2.0 * TRUNCATION * self.tau, len(self.knots))

    @property
    def envelope(self) -> GaussianEnvelope:
        return GaussianEnvelope(self.omega_peak, self.tau, self.t0)

    @property
    def detuning(self) -> SampledDetuning:
        return SampledDetuning(tuple(self.knot_times), self.knots)

    def pulse(self, eps_pol: float = 0.0) -> PulseSpec:
        return PulseSpec(self.envelope, self.detuning, eps_pol, "OCT M")

    def to_vector(self) -> np.ndarray:
        return np.array((self.omega_peak, self.tau) + self.knots)

    @classmethod
    def from_vector(cls, x: np.ndarray, t0: float) -> "ControlParams":
        x = np.clip(x, *bounds_arrays(len(x) - 2))
        return cls(float(x[0]), float(x[1]), t0, tuple(x[2:]))

    @classmethod
    def from_pulse(cls, pulse: PulseSpec, n_knots: int = DEFAULT_KNOTS) -> "ControlParams":
        """Sample an existing pulse's detuning at the knot times."""
        env = pulse.envelope
        local = np.linspace(0.0, 2.0 * TRUNCATION * env.tau, n_knots)
        values = pulse.detuning.value(local + env.t0 - TRUNCATION * env.tau, env)
        values = np.clip(np.atleast_1d(values), *KNOT_BOUNDS)
        omega = float(np.clip(env.omega_peak, *OMEGA_BOUNDS))
        tau = float(np.clip(env.tau, *TAU_BOUNDS))
        return cls(omega, tau, env.t0, tuple(values))


def bounds_arrays(n_knots: int) -> Tuple[np.ndarray, np.ndarray]:
    lo = np.array([OMEGA_BOUNDS[0], TAU_BOUNDS[0]] + [KNOT_BOUNDS[0]] * n_knots)
    hi = np.array([OMEGA_BOUNDS[1], TAU_BOUNDS[1]] + [KNOT_BOUNDS[1]] * n_knots)
    return lo, hi


@dataclass(frozen=True)
class CostConfig:
    """Momentum samples of the averaged swap infidelity."""
    p_range: Tuple[float, float] = (-0.2, 0.2)
    n_samples: int = 9
    eps_pol: float = 0.0
    rtol: float = 1e-8

    def __post_init__(self):
        lo, hi = self.p_range
        if abs(lo + hi) > 1e-12:
            raise ConfigError("momentum samples must be symmetric about 0")
        if self.n_samples < 1:
            raise ConfigError("at least one momentum sample is required")

    @property
    def samples(self) -> np.ndarray:
        if self.n_samples == 1:
            return np.zeros(1)
        return np.linspace(*self.p_range, self.n_samples)


def swap_infidelity(s: np.ndarray) -> float:
    """Mean of |1 - |M_32|^2| + |1 - |M_23|^2| over stacked S-matrices."""
    right = np.abs(s[..., 2, 1]) ** 2
    left = np.abs(s[..., 1, 2]) ** 2
    return float(np.mean(np.abs(1.0 - right) + np.abs(1.0 - left)))


def mirror_cost(params: ControlParams, cfg: Optional[CostConfig] = None) -> float:
    """Momentum-averaged swap infidelity of the candidate mirror (0 is perfect)."""
    cfg = cfg or CostConfig()
    s = pulse_smatrices(params.pulse(cfg.eps_pol), cfg.samples, rtol=cfg.rtol)
    return swap_infidelity(s)


@dataclass
class OptimizationResult:
    """Outcome of :func:`optimize_mirror`.

    ``trace[k]`` is the best cost after k + 1 evaluations; ``history`` holds
    every evaluated (cost, vector) pair in order.
    """
    best: ControlParams
    cost: float
    initial_cost: float
    trace: List[float] = field(default_factory=list)
    history: List[Tuple[float, np.ndarray]] = field(default_factory=list)
    restarts: int = 0

    @property
    def evaluations(self) -> int:
        return len(self.trace)

    @property
    def improved(self) -> bool:
        return self.cost < self.initial_cost

    def profile(self) -> SampledDetuning:
        return self.best.detuning


class _BudgetExhausted(Exception):
    pass


class _Objective:
    """Counts evaluations and tracks the best point seen."""

    def __init__(self, cfg: CostConfig, t0: float, budget: int):
        self.cfg = cfg
        self.t0 = t0
        self.budget = budget
        self.best_cost = np.inf
        self.best_x: Optional[np.ndarray] = None
        self.trace: List[float] = []
        self.history: List[Tuple[float, np.ndarray]] = []

    def __call__(self, x: np.ndarray) -> float:
        if len(self.trace) >= self.budget:
            raise _BudgetExhausted()
        params = ControlParams.from_vector(np.asarray(x, dtype=float), self.t0)
        cost = mirror_cost(params, self.cfg)
        if cost < self.best_cost:
            self.best_cost = cost
            self.best_x = params.to_vector()
        self.trace.append(self.best_cost)
        self.history.append((cost, params.to_vector()))
        return cost

    @property
    def remaining(self) -> int:
        return self.budget - len(self.trace)


def optimize_mirror(init: ControlParams, cfg: Optional[CostConfig] = None,
                    budget: int = 2000, seed: int = 0, restarts: int = 4) -> OptimizationResult:
    """Minimize the mirror cost from ``init``.

    Args:
        init: Starting point, e.g. ``ControlParams.from_pulse`` of the DS-DBD mirror
        cfg: Cost sampling
        budget: Maximum number of cost evaluations (at least 200)
        seed: Seed of the Philox generator that perturbs restart points
        restarts: Nelder-Mead runs sharing the budget

    Returns:
        Best parameters found; ``improved`` is False if nothing beat ``init``
    """
    cfg = cfg or CostConfig()
    if budget < MIN_BUDGET:
        raise ConfigError(f"budget must be at least {MIN_BUDGET} evaluations")
    if restarts < 1:
        raise ConfigError("restarts must be at least 1")

    rng = np.random.Generator(np.random.Philox(seed))
    lo, hi = bounds_arrays(len(init.knots))
    objective = _Objective(cfg, init.t0, budget)
    initial_cost = objective(init.to_vector())
    x0 = init.to_vector()
    runs = 0

    for run in range(restarts):
        share = objective.remaining // (restarts - run)
        if share < len(x0) + 2:
            break
        simplex = np.vstack([x0, x0 + np.diag(SIMPLEX_STEP * (hi - lo))])
        simplex = np.clip(simplex, lo, hi)
        try:
            minimize(objective, x0, method="Nelder-Mead", bounds=list(zip(lo, hi)),
                     options=dict(maxfev=share, initial_simplex=simplex,
                                  xatol=1e-6, fatol=1e-9, disp=False))
        except _BudgetExhausted:
            logger.debug("Evaluation budget exhausted inside a restart")
        runs += 1
        logger.debug(f"Restart {run}: best cost {objective.best_cost:.6g} "
                     f"after {len(objective.trace)} evaluations")
        # next run starts near the best point so far
        x0 = np.clip(objective.best_x + RESTART_SPREAD * (hi - lo) * rng.standard_normal(len(x0)), lo, hi)

    best = ControlParams.from_vector(objective.best_x, init.t0)
    result = OptimizationResult(best, objective.best_cost, initial_cost,
                                objective.trace, objective.history, runs)
    if not result.improved:
        logger.warning(f"Mirror optimization did not improve on the initial cost {initial_cost:.6g}")
    else:
        logger.info(f"Mirror cost {initial_cost:.6g} -> {result.cost:.6g} "
                    f"in {result.evaluations} evaluations")
    return result
