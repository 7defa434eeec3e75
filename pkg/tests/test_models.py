"""Tests for strategies and run configuration."""

import pytest

from dbdsim.errors import ConfigError
from dbdsim.models import RobustnessSpec, RunConfig, Strategy


def test_strategy_parse():
    """Test display-name lookup."""
    assert Strategy.parse("oct") is Strategy.OCT
    assert Strategy.parse(" c-dbd ") is Strategy.C_DBD
    with pytest.raises(ConfigError):
        Strategy.parse("unknown")


def test_run_config_defaults():
    """Test the default run configuration."""
    config = RunConfig()
    assert config.strategies == (Strategy.DS_DBD,)
    assert config.g == 0.000357
    assert config.sigma_p == 0.05


def test_run_config_all_strategies():
    """Test that 'all' selects every strategy in order."""
    assert RunConfig(strategy="all").strategies == tuple(Strategy)


def test_run_config_round_trip():
    """Test that the nested document reproduces the config."""
    config = RunConfig(strategy="CD-DBD", seed=7, p0=0.1, sigma_p=0.01, T_min=10.0)
    data = config.to_dict()
    assert data["physics"]["p0"] == 0.1
    assert data["scan"]["T_min"] == 10.0
    assert "p0" not in data
    assert RunConfig.from_dict(data) == config


def test_run_config_from_flat_dict():
    """Test that flat documents are accepted too."""
    assert RunConfig.from_dict({"seed": 3, "g": 0.0}).seed == 3


@pytest.mark.parametrize("data", [
    {"colour": "red"},
    {"physics": {"mass": 1.0}},
    {"physics": 3},
])
def test_run_config_unknown_keys(data):
    """Test that unknown keys are configuration errors."""
    with pytest.raises(ConfigError):
        RunConfig.from_dict(data)


@pytest.mark.parametrize("kwargs", [
    {"strategy": "X"},
    {"engine": "fast"},
    {"sigma_p": 0.0},
    {"eps_pol": 0.3},
    {"nodes": 10},
    {"workers": 0},
    {"dt": -1.0},
])
def test_run_config_validation(kwargs):
    """Test rejection of invalid settings."""
    with pytest.raises(ConfigError):
        RunConfig(**kwargs)


def test_with_overrides_ignores_none():
    """Test that unset flags keep config values."""
    config = RunConfig(seed=5)
    updated = config.with_overrides(seed=None, p0=0.2)
    assert updated.seed == 5
    assert updated.p0 == 0.2


def test_robustness_spec_validation():
    """Test sigma_R range and realization count."""
    assert RobustnessSpec().realizations == 10
    with pytest.raises(ConfigError):
        RobustnessSpec(sigma_R=(0.2,))
    with pytest.raises(ConfigError):
        RobustnessSpec(realizations=1)
