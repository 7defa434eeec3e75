"""Unit tests for the SMatrixRepo class."""

from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from dbdsim.errors import ConfigError
from dbdsim.five_level import pulse_smatrices
from dbdsim.repo import SMatrixRepo


@pytest.fixture
def repo():
    """Create a repo with a looser tolerance to keep the tests quick."""
    return SMatrixRepo(rtol=1e-8)


@pytest.fixture
def bs(c_dbd):
    return c_dbd.bs


def test_repo_initialization(repo):
    """Test that repo starts empty."""
    assert len(repo) == 0
    assert repo.hits == repo.misses == 0
    assert repo.rtol == 1e-8


def test_repo_get_missing(repo, bs):
    """Test getting an S-matrix that was never computed."""
    assert repo.get(bs, 0.0) is None


def test_repo_add_and_get(repo, bs):
    """Test storing an externally computed S-matrix."""
    s = np.eye(5, dtype=complex)
    repo.add(bs, 0.1, s)
    stored = repo.get(bs, 0.1)
    assert np.array_equal(stored, s)
    assert repo.get(bs, 0.1, levels=7) is None
    with pytest.raises(ValueError):
        stored[0, 0] = 2.0


def test_repo_get_many_caches(repo, bs):
    """Test that repeated requests are served from the cache."""
    first = repo.get_many(bs, [0.0, 0.1])
    assert first.shape == (2, 5, 5)
    assert repo.misses == 2
    second = repo.get_many(bs, [0.1, 0.0, 0.1])
    assert repo.misses == 2
    assert repo.hits == 3
    assert np.array_equal(second[1], first[0])
    assert len(repo) == 2


def test_repo_matches_direct_integration(repo, bs):
    """Test that cached entries equal a direct batch integration."""
    cached = repo.get_many(bs, [0.05])
    direct = pulse_smatrices(bs, [0.05], rtol=1e-8)
    assert np.allclose(cached, direct, atol=1e-12)


def test_repo_keys_include_pulse(repo, c_dbd):
    """Test that different pulses never share entries."""
    repo.get_many(c_dbd.bs, [0.0])
    repo.get_many(c_dbd.mirror, [0.0])
    assert len(repo) == 2


def test_repo_rounds_momenta(repo, bs):
    """Test that momenta equal to 12 decimals share an entry."""
    repo.get_many(bs, [0.1])
    repo.get_many(bs, [0.1 + 1e-14])
    assert len(repo) == 1


def test_repo_clear(repo, bs):
    """Test clearing the cache."""
    repo.get_many(bs, [0.0])
    repo.clear()
    assert len(repo) == 0


def test_repo_thread_safety(repo, bs):
    """Test that concurrent requests agree with each other."""
    with ThreadPoolExecutor(max_workers=4) as pool:
        results = list(pool.map(lambda _: repo.get_many(bs, [0.0, 0.02]), range(4)))
    for result in results[1:]:
        assert np.allclose(result, results[0])
    assert len(repo) == 2


def test_repo_evicts_least_recently_used(bs):
    """Test that the cache stays bounded and drops the oldest entries first."""
    repo = SMatrixRepo(rtol=1e-8, max_entries=3)
    repo.get_many(bs, [0.0, 0.01, 0.02])
    repo.get(bs, 0.0)
    repo.get_many(bs, [0.03])
    assert len(repo) == 3
    assert repo.get(bs, 0.01) is None
    assert repo.get(bs, 0.0) is not None


def test_repo_request_larger_than_bound(bs):
    """Test that one request may exceed the bound and still returns every matrix."""
    repo = SMatrixRepo(rtol=1e-8, max_entries=2)
    result = repo.get_many(bs, [0.0, 0.01, 0.02, 0.03])
    assert result.shape == (4, 5, 5)
    assert len(repo) == 2
    assert np.allclose(result[0], pulse_smatrices(bs, [0.0], rtol=1e-8)[0], atol=1e-12)


def test_repo_rejects_empty_bound():
    """Test validation of the size bound."""
    with pytest.raises(ConfigError):
        SMatrixRepo(max_entries=0)
