"""Exceptions raised by dbdsim and their CLI exit codes."""

from typing import Optional


class DbdError(Exception):
    """Base class for all dbdsim errors."""


class ConfigError(DbdError, ValueError):
    """Invalid input, parameter range or configuration document."""


class GridError(ConfigError):
    """Spatial grid cannot represent the requested state or readout."""


class SequenceError(ConfigError):
    """Pulse sequence is ill-formed (overlapping windows, T too short)."""


class ProfileFormatError(ConfigError):
    """Detuning profile file could not be parsed."""

    def __init__(self, message: str, line: Optional[int] = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ProfileRequiredError(ConfigError):
    """The OCT preset was requested without a detuning profile."""


class NumericalError(DbdError, ArithmeticError):
    """A computation failed or left its domain of validity."""


class BoundaryContactError(NumericalError):
    """Wave packet reached the edge of the spatial grid."""

    def __init__(self, time: float, density: float):
        super().__init__(
            f"wave packet touched the grid boundary at t = {time:.6g} "
            f"(edge density {density:.3g})"
        )
        self.time = time
        self.density = density


class IntegrationError(NumericalError):
    """The adaptive ODE integrator did not reach the requested tolerance."""

    def __init__(self, message: str, worst_time: Optional[float] = None):
        if worst_time is not None:
            message = f"{message} (worst time t = {worst_time:.6g})"
        super().__init__(message)
        self.worst_time = worst_time


class QuadratureError(NumericalError):
    """Momentum quadrature did not converge on node doubling."""


class ModelRangeError(NumericalError):
    """Quasi-momentum left the first Brillouin zone of the S-matrix model."""

    def __init__(self, p: float):
        super().__init__(
            f"T too large for S-matrix model: quasi-momentum p = {p:.6g} "
            f"outside (-1, 1)"
        )
        self.p = p


class UndersampledError(NumericalError):
    """A T-scan is too coarse to resolve the fringe."""

    def __init__(self, required: int):
        super().__init__(
            f"T-scan undersampled, at least {required} points are required"
        )
        self.required = required


class ExtremumError(NumericalError):
    """No non-trivial fringe extremum was bracketed by the scan."""


def exit_code(exc: BaseException) -> int:
    """Map an exception to the CLI exit code (2 config, 3 numerical)."""
    if isinstance(exc, ConfigError):
        return 2
    if isinstance(exc, NumericalError):
        return 3
    return 1
