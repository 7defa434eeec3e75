"""Storage module for dbdsim: profiles, config documents and result tables."""

import json
import os
import re
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import scipy

from . import __version__
from .errors import ConfigError, ProfileFormatError
from .logger import logger
from .models import RunConfig
from .pulses import OCT_MIRROR, GaussianEnvelope, PulseSpec, SampledDetuning

PROFILE_COLUMNS = "t_over_omega_rec_inv, delta_over_omega_rec"
_ENVELOPE_LINE = re.compile(
    r"#\s*envelope:\s*omega_peak=(?P<omega>\S+)\s+tau=(?P<tau>\S+)\s+t0=(?P<t0>\S+)"
)


def ensure_storage_dir(path: str):
    """Ensure the directory that will hold ``path`` exists."""
    directory = os.path.dirname(os.path.abspath(path))
    try:
        os.makedirs(directory, exist_ok=True)
    except PermissionError as e:
        logger.error(f"Permission denied when creating output directory: {e}")
        raise
    except OSError as e:
        logger.error(f"Failed to create output directory: {e}")
        raise


def _read_lines(path: str) -> List[str]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return f.read().splitlines()
    except FileNotFoundError:
        logger.error(f"File not found: {path}")
        raise ConfigError(f"File not found: {path}")
    except PermissionError as e:
        logger.error(f"Permission denied when reading {path}: {e}")
        raise
    except OSError as e:
        logger.error(f"Failed to read {path}: {e}")
        raise


def _write_text(path: str, text: str):
    try:
        ensure_storage_dir(path)
        with open(path, "w", encoding="utf-8") as f:
            f.write(text)
        logger.info(f"Wrote {path}")
    except PermissionError as e:
        logger.error(f"Permission denied when writing {path}: {e}")
        raise
    except OSError as e:
        logger.error(f"Failed to write {path}: {e}")
        raise


def _fmt(value: Any) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def load_sampled_detuning(path: str) -> SampledDetuning:
    """Load a two-column detuning profile file.

    Lines starting with '#' and blank lines are ignored; columns may be
    separated by commas or whitespace.

    Args:
        path: Profile file

    Returns:
        Sampled detuning with strictly increasing times
    """
    times: List[float] = []
    values: List[float] = []
    for number, raw in enumerate(_read_lines(path), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [part for part in re.split(r"[,\s]+", line) if part]
        if len(parts) != 2:
            raise ProfileFormatError(f"expected two columns, found {len(parts)}", number)
        try:
            t, delta = float(parts[0]), float(parts[1])
        except ValueError:
            raise ProfileFormatError(f"non-numeric row '{line}'", number)
        if not (np.isfinite(t) and np.isfinite(delta)):
            raise ProfileFormatError(f"non-finite value in row '{line}'", number)
        if times and t <= times[-1]:
            raise ProfileFormatError(f"time {t} does not increase (previous {times[-1]})", number)
        times.append(t)
        values.append(delta)
    if len(times) < 2:
        raise ProfileFormatError(f"{path} holds fewer than two samples")
    logger.debug(f"Loaded {len(times)} detuning samples from {path}")
    return SampledDetuning(tuple(times), tuple(values))


def save_sampled_detuning(path: str, profile: SampledDetuning,
                          envelope: Optional[GaussianEnvelope] = None,
                          metadata: Optional[Dict[str, Any]] = None):
    """Write a detuning profile, optionally with the envelope it belongs to."""
    lines = [
        f"# dbdsim {__version__} detuning profile",
        f"# columns: {PROFILE_COLUMNS}",
        "# times on the window-local axis t~ = t - t0 + 5 tau",
    ]
    if envelope is not None:
        lines.append(f"# envelope: omega_peak={envelope.omega_peak!r} tau={envelope.tau!r} t0={envelope.t0!r}")
    for key, value in (metadata or {}).items():
        lines.append(f"# {key}: {value}")
    lines.extend(f"{t!r}, {v!r}" for t, v in zip(profile.times, profile.values))
    _write_text(path, "\n".join(lines) + "\n")


def load_profile_envelope(path: str) -> Optional[GaussianEnvelope]:
    """Gaussian envelope stored in a profile header, if any."""
    for line in _read_lines(path):
        match = _ENVELOPE_LINE.match(line.strip())
        if match:
            try:
                return GaussianEnvelope(float(match["omega"]), float(match["tau"]), float(match["t0"]))
            except ValueError as e:
                raise ProfileFormatError(f"invalid envelope header: {e}")
    return None


def load_mirror_pulse(path: str) -> PulseSpec:
    """Mirror pulse from a profile file; the envelope defaults to the OCT mirror."""
    envelope = load_profile_envelope(path) or OCT_MIRROR
    return PulseSpec(envelope, load_sampled_detuning(path))


def load_config(path: str) -> RunConfig:
    """Load a JSON run configuration document."""
    try:
        data = json.loads("\n".join(_read_lines(path)))
    except json.JSONDecodeError as e:
        logger.error(f"Failed to decode JSON config {path}: {e}")
        raise ConfigError(f"Invalid JSON in {path}: {e}")
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must hold a JSON object")
    return RunConfig.from_dict(data)


def save_config(config: RunConfig, path: str):
    """Write a run configuration as a JSON document."""
    _write_text(path, json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n")


def table_header(config: Optional[RunConfig] = None,
                 metadata: Optional[Dict[str, Any]] = None) -> List[str]:
    """'#'-prefixed metadata lines: versions, resolved config, seed, extras."""
    lines = [f"# dbdsim {__version__} numpy {np.__version__} scipy {scipy.__version__}"]
    if config is not None:
        lines.append(f"# config: {json.dumps(config.to_dict(), sort_keys=True)}")
        lines.append(f"# seed: {config.seed}")
    for key, value in (metadata or {}).items():
        lines.append(f"# {key}: {value}")
    return lines


def format_table(columns: Sequence[str], rows: Iterable[Sequence[Any]],
                 config: Optional[RunConfig] = None,
                 metadata: Optional[Dict[str, Any]] = None) -> str:
    """Render a delimited table with its metadata header."""
    lines = table_header(config, metadata)
    lines.append(",".join(columns))
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def write_table(path: str, columns: Sequence[str], rows: Iterable[Sequence[Any]],
                config: Optional[RunConfig] = None,
                metadata: Optional[Dict[str, Any]] = None):
    """Write a delimited table with a '#'-prefixed metadata header."""
    _write_text(path, format_table(columns, rows, config, metadata))


def read_table(path: str) -> Tuple[Dict[str, str], List[str], List[List[str]]]:
    """Read a table written by :func:`write_table`.

    Returns:
        (metadata, column names, rows of raw string cells)
    """
    metadata: Dict[str, str] = {}
    columns: List[str] = []
    rows: List[List[str]] = []
    for line in _read_lines(path):
        if line.startswith("#"):
            key, sep, value = line[1:].strip().partition(": ")
            if sep:
                metadata[key] = value
        elif not columns:
            columns = line.split(",")
        elif line:
            rows.append(line.split(","))
    return metadata, columns, rows


def read_table_config(path: str) -> RunConfig:
    """Recover the run configuration embedded in a table."""
    metadata, _, _ = read_table(path)
    if "config" not in metadata:
        raise ConfigError(f"{path} carries no embedded config")
    return RunConfig.from_dict(json.loads(metadata["config"]))


def write_density(path: str, times: np.ndarray, z: np.ndarray, db: np.ndarray,
                  config: Optional[RunConfig] = None,
                  metadata: Optional[Dict[str, Any]] = None):
    """Write a density movie as a long (t, z, dB) table.

    ``db`` has shape (len(times), len(z)), values in dB relative to the
    maximum of the initial density, floored at -60 dB.
    """
    info = {"density": "10 log10(|psi(z,t)|^2 / max_z |psi(z,0)|^2), floor -60 dB"}
    info.update(metadata or {})
    rows = ((t, zz, value) for t, row in zip(times, db) for zz, value in zip(z, row))
    write_table(path, ("t", "z", "dB"), rows, config, info)
