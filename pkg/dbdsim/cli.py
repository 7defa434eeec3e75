"""Main CLI module for dbdsim."""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import click
from rich.console import Console
from rich.table import Table

from .errors import ConfigError, DbdError, exit_code
from .logger import logger
from .models import Engine, PulseKind, RobustnessSpec, RunConfig, ScanAxis
from .repo import SMatrixRepo
from .scans import (
    ResultTable, cmd_contrast_scan, cmd_curves, cmd_density, cmd_efficiency,
    cmd_landscape, cmd_optimize_mirror, cmd_robustness, cmd_tscan, write_density_run,
)
from .storage import load_config

console = Console()

DEFAULT_PROFILE = "oct_mirror_profile.csv"
MAX_DISPLAY_ROWS = 40


@dataclass
class CliState:
    """Shared state of one CLI invocation."""
    repo: SMatrixRepo = field(default_factory=SMatrixRepo)
    base: RunConfig = field(default_factory=RunConfig)


def create_result_table(result: ResultTable, max_rows: int = MAX_DISPLAY_ROWS) -> Table:
    """Create a rich table showing (the head of) a result table.

    Args:
        result: Rows to display
        max_rows: Rows shown before the table is cut

    Returns:
        A rich Table object
    """
    table = Table(show_header=True, header_style="bold", title=result.title or None)
    for i, name in enumerate(result.columns):
        table.add_column(name, style="cyan" if i == 0 else "green")
    for row in result.rows[:max_rows]:
        table.add_row(*(_cell(v) for v in row))
    if len(result.rows) > max_rows:
        table.caption = f"{len(result.rows) - max_rows} more rows in the output file"
    return table


def _cell(value) -> str:
    if isinstance(value, float):
        return f"{value:.5f}"
    if value is None:
        return "-"
    return str(value)


def _floats(text: Optional[str]) -> Optional[List[float]]:
    if text is None:
        return None
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"expected a comma-separated list of numbers, got '{text}'")


def run_options(fn: Callable) -> Callable:
    """Flags shared by every subcommand; each overrides the config file."""
    options = [
        click.option('--strategy', '-s', help='C-DBD, CD-DBD, DS-DBD, OCT or all'),
        click.option('--engine', type=click.Choice([e.value for e in Engine]), help='Evaluation engine'),
        click.option('--seed', type=int, help='Seed of the Philox generator'),
        click.option('--workers', type=int, help='Worker threads for scans'),
        click.option('--output', '-o', type=click.Path(dir_okay=False), help='Output table path'),
        click.option('--oct-profile', type=click.Path(dir_okay=False), help='OCT mirror detuning profile'),
        click.option('--g', type=float, help='Effective acceleration (omega_rec^2 / k_L)'),
        click.option('--T', 'T', type=float, help='Interrogation time (1 / omega_rec)'),
        click.option('--p0', type=float, help='Mean momentum (hbar k_L)'),
        click.option('--sigma-p', type=float, help='Momentum width (hbar k_L)'),
        click.option('--eps-pol', type=float, help='Polarization error'),
        click.option('--T-min', 'T_min', type=float, help='First T of a scan'),
        click.option('--T-max', 'T_max', type=float, help='Last T of a scan'),
        click.option('--n-T', 'n_T', type=int, help='Points of a T-scan'),
        click.option('--nodes', type=int, help='Gauss-Legendre nodes'),
        click.option('--n-points', type=int, help='Spatial grid points (power of two)'),
        click.option('--length', type=float, help='Spatial grid length (multiple of pi)'),
        click.option('--dt', type=float, help='Split-operator time step'),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def _resolve(state: CliState, flags: dict) -> RunConfig:
    try:
        return state.base.with_overrides(**flags)
    except TypeError as e:
        raise ConfigError(str(e))


def _fail(ctx: click.Context, e: DbdError, action: str):
    logger.error(f"Failed to {action}: {e}")
    console.print(f"❌ Failed to {action}: {e}", style="red")
    ctx.exit(exit_code(e))


def _emit(result: ResultTable, config: RunConfig):
    console.print(create_result_table(result))
    if config.output:
        result.write(config.output, config)
        console.print(f"✅ Wrote {config.output}", style="green")


@click.group()
@click.option('-v', '--verbose', is_flag=True, help='Enable verbose (debug) output')
@click.option('--config', 'config_path', type=click.Path(dir_okay=False), help='JSON run configuration')
@click.pass_context
def cli(ctx, verbose, config_path):
    """dbdsim - double Bragg Mach-Zehnder interferometer simulator."""
    if verbose:
        logger.setLevel(logging.DEBUG)
    else:
        logger.setLevel(logging.WARNING)
    if not ctx.obj:
        ctx.obj = CliState()
    if config_path:
        try:
            ctx.obj.base = load_config(config_path)
        except DbdError as e:
            _fail(ctx, e, "load config")


@cli.command()
@run_options
@click.pass_context
def efficiency(ctx, **flags):
    """Gaussian-averaged beam-splitter and mirror efficiencies."""
    try:
        config = _resolve(ctx.obj, flags)
        _emit(cmd_efficiency(config, ctx.obj.repo), config)
    except DbdError as e:
        _fail(ctx, e, "compute efficiencies")


@cli.command()
@run_options
@click.option('--pulse', type=click.Choice([k.value for k in PulseKind], case_sensitive=False),
              default='BS', show_default=True, help='Which pulse to map')
@click.option('--p-range', nargs=2, type=float, default=(-1.0, 1.0), show_default=True)
@click.option('--eps-range', nargs=2, type=float, default=(0.0, 0.2), show_default=True)
@click.option('--resolution', type=int, default=41, show_default=True, help='Samples per axis')
@click.option('--curves', is_flag=True, help='Export all five transition probabilities instead')
@click.pass_context
def landscape(ctx, pulse, p_range, eps_range, resolution, curves, **flags):
    """Efficiency landscape F(p, eps_pol) or transition-probability curves."""
    try:
        config = _resolve(ctx.obj, flags)
        kind = PulseKind(pulse.upper())
        if curves:
            result = cmd_curves(config, kind, tuple(p_range), resolution, ctx.obj.repo)
        else:
            result = cmd_landscape(config, kind, tuple(p_range), tuple(eps_range), resolution, ctx.obj.repo)
        _emit(result, config)
    except DbdError as e:
        _fail(ctx, e, "compute landscape")


@cli.command()
@run_options
@click.pass_context
def tscan(ctx, **flags):
    """Scan the interrogation time and report the conjugate-port fringe."""
    try:
        config = _resolve(ctx.obj, flags)
        result = cmd_tscan(config, ctx.obj.repo)
        _emit(result, config)
        for key, value in result.metadata.items():
            if key.endswith("contrast"):
                console.print(f"📈 {key}: {value}", style="bold")
    except DbdError as e:
        _fail(ctx, e, "run T-scan")


@cli.command('contrast-scan')
@run_options
@click.option('--axis', type=click.Choice([a.value for a in ScanAxis]), required=True)
@click.option('--values', 'values_text', help='Comma-separated axis values')
@click.option('--grid', nargs=3, type=float, help='START STOP STEP of the axis values')
@click.pass_context
def contrast_scan(ctx, axis, values_text, grid, **flags):
    """Contrast versus sigma_p, p0 or eps_pol."""
    try:
        config = _resolve(ctx.obj, flags)
        values = _floats(values_text)
        if values is None and grid:
            start, stop, step = grid
            count = int(math.floor((stop - start) / step + 1e-9)) + 1
            values = [start + i * step for i in range(count)]
        if not values:
            raise ConfigError("give --values or --grid")
        _emit(cmd_contrast_scan(config, ScanAxis(axis), values, ctx.obj.repo), config)
    except DbdError as e:
        _fail(ctx, e, "run contrast scan")


@cli.command()
@run_options
@click.option('--sigma-R', 'sigma_R', help='Comma-separated relative depth fluctuations')
@click.option('--realizations', type=int, default=10, show_default=True)
@click.option('--shared-factor', is_flag=True, help='One factor for all three pulses per realization')
@click.pass_context
def robustness(ctx, sigma_R, realizations, shared_factor, **flags):
    """Monte Carlo contrast under lattice-depth fluctuations."""
    try:
        config = _resolve(ctx.obj, flags)
        values = _floats(sigma_R)
        spec = RobustnessSpec(realizations=realizations, shared_factor=shared_factor)
        if values:
            spec = RobustnessSpec(tuple(values), realizations, shared_factor)
        _emit(cmd_robustness(config, spec, ctx.obj.repo), config)
    except DbdError as e:
        _fail(ctx, e, "run robustness scan")


@cli.command()
@run_options
@click.option('--phase', type=float, help='Choose T from the fringe phase 4 k_L g T^2 (radians)')
@click.option('--every', type=float, default=0.5, show_default=True, help='Time between frames')
@click.option('--z-stride', type=int, default=32, show_default=True, help='Keep every n-th grid point')
@click.pass_context
def density(ctx, phase, every, z_stride, **flags):
    """Real-space density movie of the full sequence (exact solver)."""
    try:
        config = _resolve(ctx.obj, flags)
        if config.output is None:
            raise ConfigError("density needs --output")
        run = cmd_density(config, phase, every, z_stride)
        write_density_run(run, config.output, config)
        ports = Table(show_header=True, header_style="bold", title=f"{run.strategy} at T = {run.T:.4f}")
        for name in ("P0", "P+2", "P-2", "P+4", "P-4"):
            ports.add_column(name, style="green")
        ports.add_row(*(_cell(float(p)) for p in run.populations))
        console.print(ports)
        console.print(f"✅ Wrote {len(run.times)} frames to {config.output}", style="green")
    except DbdError as e:
        _fail(ctx, e, "compute density")


@cli.command('optimize-mirror')
@run_options
@click.option('--budget', type=int, default=2000, show_default=True, help='Cost evaluations')
@click.option('--restarts', type=int, default=4, show_default=True)
@click.option('--knots', type=int, default=16, show_default=True, help='Detuning spline knots')
@click.option('--profile', 'profile_path', type=click.Path(dir_okay=False), help='Profile file to write')
@click.pass_context
def optimize_mirror(ctx, budget, restarts, knots, profile_path, **flags):
    """Optimize the mirror pulse and write its detuning profile."""
    try:
        config = _resolve(ctx.obj, flags)
        path = profile_path or config.oct_profile or DEFAULT_PROFILE
        run = cmd_optimize_mirror(config, path, budget, restarts, knots)
        if config.output:
            run.log.write(config.output, config)
        style = "green" if run.result.improved else "yellow"
        console.print(f"Cost {run.result.initial_cost:.6f} -> {run.result.cost:.6f} "
                      f"after {run.result.evaluations} evaluations", style=style)
        if not run.result.improved:
            console.print("ℹ️ No improvement over the DS-DBD mirror", style="yellow")
        console.print(f"📈 eta_M = {run.eta_M:.5f}", style="bold")
        console.print(f"✅ Wrote profile {path}", style="green")
    except DbdError as e:
        _fail(ctx, e, "optimize mirror")


def main():
    """Entry point for the CLI."""
    cli()
