"""Scan orchestration behind the CLI subcommands.

Each ``cmd_*`` function takes a resolved :class:`RunConfig`, does the work
and returns a :class:`ResultTable`; writing files and printing is left to the
CLI.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError, ExtremumError, ProfileRequiredError
from .exact import MovieOptions, SolverConfig, exact_efficiency, run_mz_exact
from .five_level import efficiency_landscape, integrated_efficiency, transition_probabilities
from .interferometer import (
    MZConfig, contrast_scan, extract_contrast, fit_single_cosine,
    interrogation_time_for_phase, relative_improvement, t_scan,
)
from .logger import logger
from .models import Engine, PulseKind, RobustnessSpec, RunConfig, ScanAxis, Strategy
from .oct import ControlParams, CostConfig, optimize_mirror
from .pulses import StrategyPreset, preset
from .repo import SMatrixRepo
from .storage import save_sampled_detuning, write_density, write_table
from .units import SpatialGrid, make_gaussian_packet, quasi_momentum
from .workers import parallel_map


@dataclass
class ResultTable:
    """Rows of one subcommand's output plus '#' header metadata."""
    columns: Tuple[str, ...]
    rows: List[Tuple[Any, ...]] = field(default_factory=list)
    metadata: Dict[str, Any] = field(default_factory=dict)
    title: str = ""

    def write(self, path: str, config: RunConfig):
        write_table(path, self.columns, self.rows, config, self.metadata)

    def column(self, name: str) -> List[Any]:
        index = self.columns.index(name)
        return [row[index] for row in self.rows]


def presets_for(config: RunConfig) -> List[StrategyPreset]:
    """Presets selected by ``config``; 'all' skips OCT when no profile is given."""
    selected = []
    for strategy in config.strategies:
        try:
            selected.append(preset(strategy, config.oct_profile, config.eps_pol))
        except ProfileRequiredError:
            if config.strategy.lower() != "all":
                raise
            logger.warning("Skipping OCT: no detuning profile given (--oct-profile)")
    return selected


def solver_config(config: RunConfig) -> SolverConfig:
    return SolverConfig(grid=SpatialGrid(config.n_points, config.length), dt=config.dt, g=config.g)


def mz_config(config: RunConfig, strategy: StrategyPreset, **overrides) -> MZConfig:
    values = dict(g=config.g, T=config.T or strategy.min_interrogation_time, p0=config.p0,
                  sigma_p=config.sigma_p, eps_pol=config.eps_pol, nodes=config.nodes)
    values.update(overrides)
    return MZConfig(strategy, **values)


def _engines(config: RunConfig) -> Tuple[bool, bool]:
    engine = Engine(config.engine)
    return engine in (Engine.FIVE_LEVEL, Engine.BOTH), engine in (Engine.EXACT, Engine.BOTH)


def _scan_range(config: RunConfig, strategy: StrategyPreset) -> Tuple[float, float]:
    T_min = strategy.min_interrogation_time if config.T_min is None else config.T_min
    return T_min, config.T_max


def cmd_efficiency(config: RunConfig, repo: Optional[SMatrixRepo] = None) -> ResultTable:
    """Gaussian-averaged BS and mirror efficiencies per strategy."""
    use_5ls, use_exact = _engines(config)
    repo = repo or SMatrixRepo()
    columns = ["strategy"]
    if use_5ls:
        columns += ["eta_BS", "eta_M"]
    if use_exact:
        columns += ["eta_BS_exact", "eta_M_exact"]
    table = ResultTable(tuple(columns), title="Pulse efficiencies",
                        metadata={"p0": config.p0, "sigma_p": config.sigma_p, "eps_pol": config.eps_pol})
    solver = solver_config(config)
    for strategy in presets_for(config):
        row: List[Any] = [strategy.name.value]
        if use_5ls:
            row.append(integrated_efficiency(strategy.bs, PulseKind.BS, config.p0, config.sigma_p,
                                             config.nodes, repo))
            row.append(integrated_efficiency(strategy.mirror, PulseKind.M, config.p0, config.sigma_p,
                                             config.nodes, repo))
        if use_exact:
            row.append(exact_efficiency(strategy.bs, PulseKind.BS, config.p0, config.sigma_p, solver))
            row.append(exact_efficiency(strategy.mirror, PulseKind.M, config.p0, config.sigma_p, solver))
        table.rows.append(tuple(row))
    return table


def cmd_landscape(config: RunConfig, kind: PulseKind, p_range: Tuple[float, float] = (-1.0, 1.0),
                  eps_range: Tuple[float, float] = (0.0, 0.2), resolution: int = 41,
                  repo: Optional[SMatrixRepo] = None) -> ResultTable:
    """F(p, eps_pol) tables for every selected strategy."""
    repo = repo or SMatrixRepo()
    table = ResultTable(("strategy", "p", "eps_pol", "efficiency"), title=f"{kind.value} landscape",
                        metadata={"pulse": kind.value, "resolution": resolution})
    for strategy in presets_for(config):
        pulse = strategy.bs if kind is PulseKind.BS else strategy.mirror
        landscape = efficiency_landscape(pulse, kind, p_range, eps_range, resolution, repo)
        table.rows.extend((strategy.name.value,) + row for row in landscape.rows())
    return table


def cmd_curves(config: RunConfig, kind: PulseKind, p_range: Tuple[float, float] = (-1.0, 1.0),
               resolution: int = 201, repo: Optional[SMatrixRepo] = None) -> ResultTable:
    """Outgoing probabilities of all five levels versus quasi-momentum."""
    repo = repo or SMatrixRepo()
    table = ResultTable(("strategy", "p", "P0", "P+2", "P-2", "P+4", "P-4"),
                        title=f"{kind.value} transition probabilities",
                        metadata={"pulse": kind.value, "eps_pol": config.eps_pol})
    p = np.linspace(*p_range, resolution)
    for strategy in presets_for(config):
        pulse = strategy.bs if kind is PulseKind.BS else strategy.mirror
        probabilities = transition_probabilities(pulse, kind, p, repo=repo)
        table.rows.extend((strategy.name.value, float(x)) + tuple(float(v) for v in row)
                          for x, row in zip(p, probabilities))
    return table


def cmd_tscan(config: RunConfig, repo: Optional[SMatrixRepo] = None) -> ResultTable:
    """Fringe P_{+-2}(T) per strategy with contrast and single-cosine fit in the header."""
    use_5ls, use_exact = _engines(config)
    repo = repo or SMatrixRepo()
    columns = ["strategy", "T"]
    if use_5ls:
        columns += ["P_pm2", "P1", "leakage"]
    if use_exact:
        columns += ["P_pm2_exact"]
    table = ResultTable(tuple(columns), title="T-scan", metadata={"n_T": config.n_T})
    for strategy in presets_for(config):
        mz = mz_config(config, strategy)
        T_min, T_max = _scan_range(config, strategy)
        signals = {}
        if use_5ls:
            signals["5ls"] = t_scan(mz, T_min, T_max, config.n_T, repo, workers=config.workers)
        if use_exact:
            signals["exact"] = t_scan(mz, T_min, T_max, config.n_T, engine=Engine.EXACT,
                                      solver=solver_config(config), workers=config.workers)
        for name, signal in signals.items():
            key = f"{strategy.name.value} {name}"
            try:
                result = extract_contrast(signal)
                table.metadata[f"{key} contrast"] = f"{result.contrast!r} (T_max={result.T_max!r}, T_min={result.T_min!r})"
            except ExtremumError as e:
                table.metadata[f"{key} contrast"] = f"n/a ({e})"
            fit = fit_single_cosine(signal, config.g)
            table.metadata[f"{key} cosine fit"] = f"A={fit.offset!r} C={fit.contrast!r} phi={fit.phase!r} rms={fit.rms!r}"
        T = next(iter(signals.values())).T
        for i, t in enumerate(T):
            row: List[Any] = [strategy.name.value, float(t)]
            if use_5ls:
                s = signals["5ls"]
                row += [float(s.conjugate[i]), float(s.P1[i]), float(s.leakage[i])]
            if use_exact:
                row.append(float(signals["exact"].conjugate[i]))
            table.rows.append(tuple(row))
    return table


def cmd_contrast_scan(config: RunConfig, axis: ScanAxis, values: Sequence[float],
                      repo: Optional[SMatrixRepo] = None) -> ResultTable:
    """Contrast per (strategy, value), with relative gain over C-DBD when selected."""
    if not values:
        raise ConfigError("contrast-scan needs at least one value")
    use_5ls, use_exact = _engines(config)
    repo = repo or SMatrixRepo()
    engine = Engine(config.engine)
    columns = ["strategy", axis.value, "contrast", "offset"]
    if use_exact:
        columns.append("contrast_exact")
    strategies = presets_for(config)
    with_reference = any(s.name is Strategy.C_DBD for s in strategies)
    if with_reference:
        columns.append("rel_vs_C-DBD")
    table = ResultTable(tuple(columns), title=f"Contrast vs {axis.value}",
                        metadata={"values": ",".join(repr(float(v)) for v in values), "n_T": config.n_T})

    results: Dict[Strategy, list] = {}
    for strategy in strategies:
        T_min, T_max = _scan_range(config, strategy)
        template = mz_config(config, strategy, sigma_p=_template_sigma(config, axis, values))
        results[strategy.name] = contrast_scan(template, axis, values, T_max, config.n_T, repo,
                                               engine if use_exact else Engine.FIVE_LEVEL,
                                               solver_config(config), T_min, config.workers)
    reference = results.get(Strategy.C_DBD)
    for name, rows in results.items():
        for i, row in enumerate(rows):
            out: List[Any] = [name.value, row.value, row.contrast, row.offset]
            if use_exact:
                out.append(row.exact_contrast)
            if with_reference:
                out.append(relative_improvement(row.contrast, reference[i].contrast))
            table.rows.append(tuple(out))
    return table


def _template_sigma(config: RunConfig, axis: ScanAxis, values: Sequence[float]) -> float:
    # the template must be valid on its own before the axis value is swapped in
    return float(min(values)) if axis is ScanAxis.SIGMA_P else config.sigma_p


def _strategy_stream(seed: int, strategy: Strategy) -> np.random.Generator:
    code = list(Strategy).index(strategy)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(code,))))


def draw_depth_factors(spec: RobustnessSpec, seed: int, strategies: Sequence[Strategy]) -> np.ndarray:
    """Multiplicative peak-depth factors ~ N(1, sigma_R^2).

    Each strategy draws from its own Philox stream keyed by (seed, strategy),
    in the fixed order (sigma_R, realization, pulse), so its factors do not
    depend on which other strategies run alongside. Shape (len(strategies),
    len(sigma_R), realizations, 3); in shared-factor mode all three pulses
    share one draw.
    """
    shape = (len(spec.sigma_R), spec.realizations)
    sigma = np.asarray(spec.sigma_R)[:, None, None]
    blocks = []
    for strategy in strategies:
        rng = _strategy_stream(seed, strategy)
        if spec.shared_factor:
            draws = np.repeat(rng.standard_normal(shape + (1,)), 3, axis=-1)
        else:
            draws = rng.standard_normal(shape + (3,))
        blocks.append(1.0 + sigma * draws)
    return np.stack(blocks) if blocks else np.empty((0,) + shape + (3,))


def _contrast_with_factors(config: RunConfig, strategy: StrategyPreset, repo: SMatrixRepo,
                           factors: Sequence[float]) -> float:
    mz = mz_config(config, strategy, depth_factors=tuple(float(f) for f in factors))
    T_min, T_max = _scan_range(config, strategy)
    return extract_contrast(t_scan(mz, T_min, T_max, config.n_T, repo)).contrast


def cmd_robustness(config: RunConfig, spec: Optional[RobustnessSpec] = None,
                   repo: Optional[SMatrixRepo] = None) -> ResultTable:
    """Monte Carlo contrast under lattice-depth fluctuations.

    Reports mean and std over realizations plus the deterministic envelope
    contrast(Omega (1 - 1.05 sigma_R)), contrast(Omega), contrast(Omega (1 + 1.05 sigma_R)).
    """
    spec = spec or RobustnessSpec()
    repo = repo or SMatrixRepo()
    strategies = presets_for(config)
    factors = draw_depth_factors(spec, config.seed, [s.name for s in strategies])
    table = ResultTable(("strategy", "sigma_R", "mean", "std", "envelope_low", "nominal", "envelope_high"),
                        title="Lattice-depth robustness",
                        metadata={"realizations": spec.realizations,
                                  "sampling": "shared factor" if spec.shared_factor else "independent per pulse",
                                  "rng": f"Philox(seed={config.seed}, one stream per strategy)"})
    for s_index, strategy in enumerate(strategies):
        nominal = _contrast_with_factors(config, strategy, repo, (1.0, 1.0, 1.0))
        for r_index, sigma in enumerate(spec.sigma_R):
            jobs = list(factors[s_index, r_index])
            contrasts = np.array(parallel_map(lambda f: _contrast_with_factors(config, strategy, repo, f),
                                              jobs, config.workers))
            low, high = 1.0 - 1.05 * sigma, 1.0 + 1.05 * sigma
            envelope = [_contrast_with_factors(config, strategy, repo, (f, f, f)) for f in (low, high)]
            table.rows.append((strategy.name.value, float(sigma), float(contrasts.mean()),
                               float(contrasts.std(ddof=1)), envelope[0], nominal, envelope[1]))
            logger.info(f"{strategy.name.value} sigma_R={sigma:.3g}: "
                        f"C = {contrasts.mean():.4f} +- {contrasts.std(ddof=1):.4f}")
    return table


@dataclass
class DensityRun:
    times: np.ndarray
    z: np.ndarray
    db: np.ndarray
    populations: np.ndarray
    T: float
    strategy: str


def cmd_density(config: RunConfig, phase: Optional[float] = None, every: float = 0.5,
                z_stride: int = 32) -> DensityRun:
    """Density movie of the full sequence for the (single) selected strategy.

    ``T`` comes from the config, or from ``phase`` as the smallest T with
    4 k_L g T^2 = phase (mod 2 pi).
    """
    strategies = presets_for(config)
    if len(strategies) != 1:
        raise ConfigError("density needs exactly one strategy")
    strategy = strategies[0]
    if phase is not None:
        T = interrogation_time_for_phase(config.g, phase, strategy.min_interrogation_time)
    elif config.T is not None:
        T = config.T
    else:
        raise ConfigError("density needs --T or --phase")
    solver = solver_config(config)
    packet = make_gaussian_packet(quasi_momentum(config.p0), config.sigma_p, solver.grid)
    result = run_mz_exact(solver, strategy, T, packet, MovieOptions(every, z_stride))
    movie = result.movie
    return DensityRun(movie.times, movie.z, movie.db, result.populations, T, strategy.name.value)


def write_density_run(run: DensityRun, path: str, config: RunConfig):
    ports = ",".join(repr(float(p)) for p in run.populations)
    write_density(path, run.times, run.z, run.db, config,
                  {"strategy": run.strategy, "T": repr(run.T), "ports (0,+2,-2,+4,-4)": ports})


@dataclass
class MirrorOptimization:
    result: Any
    eta_M: float
    profile_path: str
    log: ResultTable


def cmd_optimize_mirror(config: RunConfig, profile_path: str, budget: int = 2000,
                        restarts: int = 4, n_knots: int = 16,
                        cost: Optional[CostConfig] = None) -> MirrorOptimization:
    """Optimize the mirror from the DS-DBD mirror and write its profile file."""
    cost = cost or CostConfig()
    start = ControlParams.from_pulse(preset(Strategy.DS_DBD).mirror, n_knots)
    result = optimize_mirror(start, cost, budget, config.seed, restarts)
    best = result.best
    eta_M = integrated_efficiency(best.pulse(), PulseKind.M, 0.0, config.sigma_p, config.nodes)
    metadata = {"cost": repr(result.cost), "initial_cost": repr(result.initial_cost),
                "evaluations": result.evaluations, "seed": config.seed,
                "improved": result.improved, "eta_M": repr(eta_M)}
    save_sampled_detuning(profile_path, result.profile(), best.envelope, metadata)

    knot_columns = tuple(f"knot{i}" for i in range(len(best.knots)))
    log = ResultTable(("evaluation", "cost", "best_cost", "omega_peak", "tau") + knot_columns,
                      title="Mirror optimization", metadata={"profile": profile_path, **metadata})
    for i, ((value, x), best_so_far) in enumerate(zip(result.history, result.trace), start=1):
        log.rows.append((i, value, best_so_far) + tuple(float(v) for v in x))
    return MirrorOptimization(result, eta_M, profile_path, log)
