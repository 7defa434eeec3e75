"""Tests for the storage module."""

import json
import os

import numpy as np
import pytest

from dbdsim.errors import ConfigError, ProfileFormatError
from dbdsim.models import RunConfig
from dbdsim.pulses import GaussianEnvelope, SampledDetuning
from dbdsim.storage import (
    ensure_storage_dir,
    load_config,
    load_profile_envelope,
    load_sampled_detuning,
    read_table,
    read_table_config,
    save_config,
    save_sampled_detuning,
    write_density,
    write_table,
)


@pytest.fixture
def profile():
    """Create a small detuning profile."""
    return SampledDetuning((0.0, 1.0, 2.5), (-4.0, 0.25, 3.5))


def test_ensure_storage_dir(tmp_path):
    """Test creating the output directory."""
    target = tmp_path / "out" / "table.csv"
    ensure_storage_dir(str(target))
    assert os.path.exists(os.path.dirname(target))


def test_ensure_storage_dir_os_error(tmp_path, monkeypatch):
    """Test output directory creation with OSError."""
    def mock_makedirs(*args, **kwargs):
        raise OSError("Mock OSError")

    monkeypatch.setattr(os, 'makedirs', mock_makedirs)
    with pytest.raises(OSError):
        ensure_storage_dir(str(tmp_path / "test" / "file.txt"))


def test_save_and_load_profile(tmp_path, profile):
    """Test that a saved profile loads back exactly."""
    path = tmp_path / "profile.csv"
    env = GaussianEnvelope(2.5, 1.8, 3.9)
    save_sampled_detuning(str(path), profile, env, {"cost": 0.01})
    loaded = load_sampled_detuning(str(path))
    assert loaded.times == profile.times
    assert loaded.values == profile.values
    assert load_profile_envelope(str(path)) == env
    assert "# cost: 0.01" in path.read_text()


def test_load_profile_whitespace_columns(tmp_path):
    """Test whitespace-separated columns and comments."""
    path = tmp_path / "profile.txt"
    path.write_text("# comment\n\n0.0   1.0\n1.0\t2.0\n")
    loaded = load_sampled_detuning(str(path))
    assert loaded.values == (1.0, 2.0)
    assert load_profile_envelope(str(path)) is None


@pytest.mark.parametrize("text, line", [
    ("0.0, 1.0\n1.0, 2.0, 3.0\n", 2),
    ("0.0, 1.0\nabc, 2.0\n", 2),
    ("# header\n0.0, 1.0\n1.0, inf\n", 3),
    ("0.0, 1.0\n2.0, 1.0\n1.0, 1.0\n", 3),
])
def test_load_profile_errors_name_line(tmp_path, text, line):
    """Test that malformed rows are reported with their line number."""
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(ProfileFormatError) as exc:
        load_sampled_detuning(str(path))
    assert exc.value.line == line
    assert f"line {line}:" in str(exc.value)


def test_load_profile_too_short(tmp_path):
    """Test that a single sample is rejected."""
    path = tmp_path / "short.csv"
    path.write_text("0.0, 1.0\n")
    with pytest.raises(ProfileFormatError):
        load_sampled_detuning(str(path))


def test_load_profile_file_not_found(tmp_path):
    """Test loading a profile that does not exist."""
    with pytest.raises(ConfigError):
        load_sampled_detuning(str(tmp_path / "missing.csv"))


def test_load_profile_permission_error(tmp_path, monkeypatch):
    """Test loading a profile with permission error."""
    def mock_open(*args, **kwargs):
        raise PermissionError("Mock PermissionError")

    monkeypatch.setattr('builtins.open', mock_open)
    with pytest.raises(PermissionError):
        load_sampled_detuning(str(tmp_path / "profile.csv"))


def test_save_profile_os_error(tmp_path, profile, monkeypatch):
    """Test saving a profile with OSError."""
    def mock_open(*args, **kwargs):
        raise OSError("Mock OSError")

    monkeypatch.setattr('builtins.open', mock_open)
    with pytest.raises(OSError):
        save_sampled_detuning(str(tmp_path / "profile.csv"), profile)


def test_save_and_load_config(tmp_path):
    """Test the JSON config document round trip."""
    path = tmp_path / "run.json"
    config = RunConfig(strategy="all", seed=11, sigma_p=0.08)
    save_config(config, str(path))
    assert json.loads(path.read_text())["physics"]["sigma_p"] == 0.08
    assert load_config(str(path)) == config


def test_load_config_invalid_json(tmp_path):
    """Test loading a config file with invalid JSON."""
    path = tmp_path / "run.json"
    path.write_text("invalid json")
    with pytest.raises(ConfigError):
        load_config(str(path))


def test_load_config_not_an_object(tmp_path):
    """Test that the document must be a JSON object."""
    path = tmp_path / "run.json"
    path.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        load_config(str(path))


def test_write_and_read_table(tmp_path):
    """Test that tables carry versions, config and seed in their header."""
    path = tmp_path / "table.csv"
    config = RunConfig(seed=42)
    write_table(str(path), ("T", "P"), [(1.0, 0.5), (2.0, 0.25)], config, {"strategy": "DS-DBD"})
    metadata, columns, rows = read_table(str(path))
    assert columns == ["T", "P"]
    assert rows == [["1.0", "0.5"], ["2.0", "0.25"]]
    assert metadata["seed"] == "42"
    assert metadata["strategy"] == "DS-DBD"
    assert path.read_text().startswith("# dbdsim ")
    assert read_table_config(str(path)) == config


def test_table_without_config(tmp_path):
    """Test that recovering a config needs an embedded one."""
    path = tmp_path / "table.csv"
    write_table(str(path), ("a",), [(1,)])
    with pytest.raises(ConfigError):
        read_table_config(str(path))


def test_write_table_is_deterministic(tmp_path):
    """Test that identical inputs give byte-identical files."""
    rows = [(0.1, 1.0 / 3.0)]
    write_table(str(tmp_path / "a.csv"), ("x", "y"), rows, RunConfig())
    write_table(str(tmp_path / "b.csv"), ("x", "y"), rows, RunConfig())
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_write_density_long_format(tmp_path):
    """Test the (t, z, dB) layout of density movies."""
    path = tmp_path / "density.csv"
    db = np.array([[0.0, -3.0], [-10.0, -60.0]])
    write_density(str(path), np.array([0.0, 1.0]), np.array([-1.0, 1.0]), db)
    _, columns, rows = read_table(str(path))
    assert columns == ["t", "z", "dB"]
    assert len(rows) == 4
    assert rows[3] == ["1.0", "1.0", "-60.0"]
