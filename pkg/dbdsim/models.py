"""Models for dbdsim runs: strategies, engines and run configuration."""

import math
from dataclasses import asdict, dataclass, field, fields, replace
from enum import Enum
from typing import Any, Dict, Optional, Tuple

from .errors import ConfigError


class Strategy(Enum):
    """Detuning-control strategies for the BS-M-BS sequence."""
    C_DBD = "C-DBD"
    CD_DBD = "CD-DBD"
    DS_DBD = "DS-DBD"
    OCT = "OCT"

    @classmethod
    def parse(cls, name: str) -> "Strategy":
        """Look a strategy up by its display name, case-insensitively."""
        key = name.strip().upper().replace("_", "-")
        for strategy in cls:
            if strategy.value == key:
                return strategy
        raise ConfigError(f"Unknown strategy '{name}', expected one of "
                          f"{', '.join(s.value for s in cls)}")


class Engine(Enum):
    """Which model evaluates the interferometer."""
    FIVE_LEVEL = "5ls"
    EXACT = "exact"
    BOTH = "both"


class PulseKind(Enum):
    """Role of a pulse in the sequence."""
    BS = "BS"
    M = "M"


class ScanAxis(Enum):
    """Parameter swept by a contrast scan."""
    SIGMA_P = "sigma_p"
    P0 = "p0"
    EPS_POL = "eps_pol"


# Gauss-Legendre nodes below this cannot resolve a 10 sigma_p window
MIN_QUADRATURE_NODES = 33

# Nested sections of the JSON config document and the RunConfig fields they hold
CONFIG_SECTIONS: Dict[str, Tuple[str, ...]] = {
    "physics": ("g", "T", "p0", "sigma_p", "eps_pol"),
    "scan": ("T_min", "T_max", "n_T", "nodes"),
    "grid": ("n_points", "length", "dt"),
}


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved configuration of one CLI run.

    Every output file embeds ``to_dict()`` of the config that produced it, so
    a run can be repeated from its own output.
    """
    strategy: str = "DS-DBD"
    engine: str = Engine.FIVE_LEVEL.value
    seed: int = 0
    workers: int = 1
    output: Optional[str] = None
    oct_profile: Optional[str] = None
    # physics
    g: float = 0.000357
    T: Optional[float] = None
    p0: float = 0.0
    sigma_p: float = 0.05
    eps_pol: float = 0.0
    # scan
    T_min: Optional[float] = None
    T_max: float = 80.0
    n_T: int = 161
    nodes: int = 65
    # grid
    n_points: int = 2 ** 15
    length: float = 1024 * math.pi
    dt: float = 0.002

    def __post_init__(self):
        if self.strategy.lower() != "all":
            Strategy.parse(self.strategy)
        try:
            Engine(self.engine)
        except ValueError:
            raise ConfigError(f"Unknown engine '{self.engine}', expected one of "
                              f"{', '.join(e.value for e in Engine)}")
        if self.sigma_p <= 0:
            raise ConfigError("sigma_p must be positive")
        if not 0.0 <= self.eps_pol <= 0.2:
            raise ConfigError("eps_pol must lie in [0, 0.2]")
        if self.nodes < MIN_QUADRATURE_NODES:
            raise ConfigError(f"at least {MIN_QUADRATURE_NODES} quadrature nodes are required")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if self.dt <= 0:
            raise ConfigError("dt must be positive")

    @property
    def strategies(self) -> Tuple[Strategy, ...]:
        """Strategies selected by this run."""
        if self.strategy.lower() == "all":
            return tuple(Strategy)
        return (Strategy.parse(self.strategy),)

    def with_overrides(self, **overrides: Any) -> "RunConfig":
        """Return a copy with every non-None override applied (flags win)."""
        values = {k: v for k, v in overrides.items() if v is not None}
        return replace(self, **values)

    def to_dict(self) -> Dict[str, Any]:
        """Convert to the nested config document."""
        flat = asdict(self)
        data: Dict[str, Any] = {}
        nested = {name for names in CONFIG_SECTIONS.values() for name in names}
        for key, value in flat.items():
            if key not in nested:
                data[key] = value
        for section, names in CONFIG_SECTIONS.items():
            data[section] = {name: flat[name] for name in names}
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunConfig":
        """Build a config from a nested (or flat) config document."""
        known = {f.name for f in fields(cls)}
        flat: Dict[str, Any] = {}
        for key, value in data.items():
            if key in CONFIG_SECTIONS:
                if not isinstance(value, dict):
                    raise ConfigError(f"Section '{key}' must be a mapping")
                for name, item in value.items():
                    if name not in CONFIG_SECTIONS[key]:
                        raise ConfigError(f"Unknown key '{key}.{name}' in config")
                    flat[name] = item
            elif key in known:
                flat[key] = value
            else:
                raise ConfigError(f"Unknown key '{key}' in config")
        try:
            return cls(**flat)
        except TypeError as e:
            raise ConfigError(f"Invalid config: {e}")


@dataclass(frozen=True)
class RobustnessSpec:
    """Monte Carlo lattice-depth fluctuation study."""
    sigma_R: Tuple[float, ...] = field(default=(0.0, 0.01, 0.02, 0.03, 0.04, 0.05))
    realizations: int = 10
    shared_factor: bool = False

    def __post_init__(self):
        if any(not 0.0 <= s <= 0.1 for s in self.sigma_R):
            raise ConfigError("sigma_R values must lie in [0, 0.1]")
        if self.realizations < 2:
            raise ConfigError("at least 2 realizations are required")
