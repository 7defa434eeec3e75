"""Tests for mirror pulse optimization."""

import numpy as np
import pytest

from dbdsim.errors import ConfigError
from dbdsim.five_level import integrated_efficiency
from dbdsim.interferometer import ideal_mirror
from dbdsim.models import PulseKind
from dbdsim.oct import (
    KNOT_BOUNDS, ControlParams, CostConfig, mirror_cost, optimize_mirror,
    swap_infidelity,
)

QUICK = CostConfig(p_range=(0.0, 0.0), n_samples=1, rtol=1e-6)


@pytest.fixture
def init(ds_dbd):
    """Start from the DS-DBD mirror with a few knots."""
    return ControlParams.from_pulse(ds_dbd.mirror, n_knots=4)


def test_swap_infidelity_limits():
    """Test the cost of a perfect mirror and of no pulse at all."""
    assert swap_infidelity(ideal_mirror()) == pytest.approx(0.0)
    assert swap_infidelity(np.eye(5)) == pytest.approx(2.0)
    assert swap_infidelity(np.stack([ideal_mirror(), np.eye(5)])) == pytest.approx(1.0)


@pytest.mark.parametrize("kwargs", [
    dict(omega_peak=0.5, tau=1.0, t0=0.0, knots=(0.0, 0.0)),
    dict(omega_peak=2.0, tau=5.0, t0=0.0, knots=(0.0, 0.0)),
    dict(omega_peak=2.0, tau=1.0, t0=0.0, knots=(0.0, 9.0)),
    dict(omega_peak=2.0, tau=1.0, t0=0.0, knots=(0.0,)),
])
def test_control_params_bounds(kwargs):
    """Test the search box."""
    with pytest.raises(ConfigError):
        ControlParams(**kwargs)


def test_from_pulse_samples_detuning(init, ds_dbd):
    """Test that knots sample the linear sweep and the spline reproduces it."""
    env = ds_dbd.mirror.envelope
    assert init.omega_peak == env.omega_peak and init.tau == env.tau
    t = np.linspace(env.t0 - 4.0 * env.tau, env.t0 + 4.0 * env.tau, 5)
    assert np.allclose(init.pulse().detuning.value(t, env), ds_dbd.mirror.detuning.value(t, env))
    assert init.knot_times[-1] == pytest.approx(10 * env.tau)


def test_vector_round_trip(init):
    """Test conversion to and from the optimizer vector."""
    x = init.to_vector()
    assert x.shape == (6,)
    assert ControlParams.from_vector(x, init.t0) == init


def test_from_vector_clips():
    """Test that out-of-box vectors are projected onto the bounds."""
    params = ControlParams.from_vector(np.array([10.0, 0.1, -20.0, 3.0]), 0.0)
    assert params.omega_peak == 4.0
    assert params.tau == 0.4
    assert params.knots == (KNOT_BOUNDS[0], 3.0)


def test_cost_config_validation():
    """Test momentum sample settings."""
    with pytest.raises(ConfigError):
        CostConfig(p_range=(-0.1, 0.2))
    with pytest.raises(ConfigError):
        CostConfig(n_samples=0)
    assert CostConfig().samples.size == 9


def test_mirror_cost_range(init):
    """Test that the cost lies between perfect and no transfer."""
    cost = mirror_cost(init, QUICK)
    assert 0.0 <= cost <= 2.0


def test_budget_and_restarts_validation(init):
    """Test minimum evaluation budget and restart count."""
    with pytest.raises(ConfigError):
        optimize_mirror(init, QUICK, budget=100)
    with pytest.raises(ConfigError):
        optimize_mirror(init, QUICK, budget=200, restarts=0)


def test_optimize_mirror_trace(init):
    """Test budget, monotone trace and deterministic restarts."""
    first = optimize_mirror(init, QUICK, budget=200, seed=3, restarts=2)
    assert first.evaluations <= 200
    assert len(first.history) == first.evaluations
    assert all(b <= a for a, b in zip(first.trace, first.trace[1:]))
    assert first.cost <= first.initial_cost
    assert first.cost == min(cost for cost, _ in first.history)
    second = optimize_mirror(init, QUICK, budget=200, seed=3, restarts=2)
    assert second.cost == first.cost
    assert second.best == first.best


@pytest.mark.slow
def test_optimized_mirror_beats_linear_sweep(ds_dbd):
    """Test that optimization improves the Gaussian-averaged mirror efficiency."""
    init = ControlParams.from_pulse(ds_dbd.mirror)
    result = optimize_mirror(init, budget=1000, seed=0)
    assert result.improved
    before = integrated_efficiency(ds_dbd.mirror, PulseKind.M, 0.0, 0.05)
    after = integrated_efficiency(result.best.pulse(), PulseKind.M, 0.0, 0.05)
    assert after > before


@pytest.mark.slow
def test_reoptimized_mirror_efficiency(oct_mirror, oct_preset):
    """Test that a seeded run within 5000 evaluations reaches eta_M >= 0.995."""
    assert oct_mirror.result.evaluations <= 5000
    assert oct_mirror.eta_M >= 0.995
    reloaded = integrated_efficiency(oct_preset.mirror, PulseKind.M, 0.0, 0.05)
    assert reloaded == pytest.approx(oct_mirror.eta_M, abs=1e-6)
