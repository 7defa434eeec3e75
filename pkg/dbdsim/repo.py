"""Repository of computed pulse S-matrices."""

import threading
from collections import OrderedDict
from typing import Dict, Hashable, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError
from .five_level import RTOL, pulse_smatrices
from .logger import logger
from .pulses import PulseSpec

# Quasi-momenta closer than this share a cache entry
P_DECIMALS = 12
# Default bound on stored S-matrices, about 80 MB of 7x7 complex matrices
MAX_ENTRIES = 100_000


class SMatrixRepo:
    """Cache of pulse S-matrices keyed by (pulse, levels, rtol, p).

    Missing entries of a request are integrated in one batch. Reads and
    writes are guarded by a lock, so one repo can serve a worker pool. At most
    ``max_entries`` matrices are kept; the least recently used go first.
    """

    def __init__(self, rtol: float = RTOL, max_entries: int = MAX_ENTRIES):
        """Initialize an empty repository.

        Args:
            rtol: Integrator tolerance of every S-matrix computed here
            max_entries: Number of S-matrices kept before evicting old ones
        """
        if max_entries < 1:
            raise ConfigError("max_entries must be at least 1")
        self._rtol = rtol
        self._max_entries = max_entries
        self._entries: "OrderedDict[Tuple[Hashable, ...], np.ndarray]" = OrderedDict()
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    @property
    def rtol(self) -> float:
        return self._rtol

    @property
    def max_entries(self) -> int:
        return self._max_entries

    def __len__(self) -> int:
        return len(self._entries)

    def _key(self, pulse: PulseSpec, levels: int, p: float) -> Tuple[Hashable, ...]:
        return pulse, levels, self._rtol, round(float(p), P_DECIMALS)

    def get(self, pulse: PulseSpec, p: float, levels: int = 5) -> Optional[np.ndarray]:
        """Get a cached S-matrix.

        Returns:
            The S-matrix if already computed, None otherwise
        """
        key = self._key(pulse, levels, p)
        with self._lock:
            s = self._entries.get(key)
            if s is not None:
                self._entries.move_to_end(key)
            return s

    def add(self, pulse: PulseSpec, p: float, s: np.ndarray, levels: int = 5):
        """Store an S-matrix computed elsewhere."""
        s = np.array(s, dtype=complex)
        s.setflags(write=False)
        with self._lock:
            self._store(self._key(pulse, levels, p), s)

    def _store(self, key: Tuple[Hashable, ...], s: np.ndarray):
        self._entries[key] = s
        self._entries.move_to_end(key)
        while len(self._entries) > self._max_entries:
            self._entries.popitem(last=False)

    def get_many(self, pulse: PulseSpec, p_values: Sequence[float], levels: int = 5) -> np.ndarray:
        """S-matrices for every p, computing the missing ones in one batch.

        Returns:
            Array of shape (len(p_values), levels, levels)
        """
        p = np.atleast_1d(np.asarray(p_values, dtype=float))
        keys = [self._key(pulse, levels, x) for x in p]
        found: Dict[Tuple[Hashable, ...], np.ndarray] = {}
        with self._lock:
            for k in keys:
                if k in self._entries:
                    found[k] = self._entries[k]
                    self._entries.move_to_end(k)
        missing = sorted({k[-1] for k in keys if k not in found})
        if missing:
            logger.debug(f"Integrating {len(missing)} S-matrices for {pulse.label or 'pulse'}")
            computed = pulse_smatrices(pulse, missing, levels, self._rtol)
            with self._lock:
                for x, s in zip(missing, computed):
                    s.setflags(write=False)
                    key = self._key(pulse, levels, x)
                    found[key] = s
                    self._store(key, s)
        with self._lock:
            self.misses += len(missing)
            self.hits += len(keys) - len(missing)
        return np.stack([found[k] for k in keys])

    def clear(self):
        with self._lock:
            self._entries.clear()
