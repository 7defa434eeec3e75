"""Five-level S-matrix description of double Bragg pulses.

A pulse couples the momentum family |p + 2n hbar k_L> of a quasi-momentum p;
truncating to n in {0, +1, -1, +2, -2} gives a 5x5 problem that is integrated
numerically for many p at once. S-matrices are returned in the interaction
picture of the kinetic Hamiltonian referenced to the pulse center, so pulses
act as impulses at their centers when composed with free propagators.

Indices below are 0-based: B_21 (1-based) is ``S[1, 0]``.
"""

from dataclasses import dataclass, replace
from typing import TYPE_CHECKING, Iterator, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import solve_ivp

from .errors import ConfigError, IntegrationError, QuadratureError
from .logger import logger
from .models import MIN_QUADRATURE_NODES, PulseKind
from .pulses import PulseSpec
from .units import HBAR, K_L, MASS, quasi_momentum

if TYPE_CHECKING:
    from .repo import SMatrixRepo

LEVELS_5 = (0, 1, -1, 2, -2)
LEVELS_7 = (0, 1, -1, 2, -2, 3, -3)

RTOL = 1e-10
ATOL = 1e-10
FIXED_STEP = 1e-3
QUADRATURE_TOL = 1e-5
# Half-width of the quadrature window in units of sigma_p
QUADRATURE_SPAN = 5.0
# p values integrated together in one ODE system
BATCH_SIZE = 256


def basis(levels: int = 5) -> Tuple[int, ...]:
    if levels == 5:
        return LEVELS_5
    if levels == 7:
        return LEVELS_7
    raise ConfigError(f"levels must be 5 or 7, got {levels}")


def coupling_matrix(levels: int = 5) -> np.ndarray:
    """1 between levels whose momenta differ by 2 hbar k_L, else 0."""
    n = np.array(basis(levels))
    return (np.abs(n[:, None] - n[None, :]) == 1).astype(float)


def kinetic_energies(p: Union[float, np.ndarray], levels: int = 5) -> np.ndarray:
    """E_n = (p + 2n hbar k_L)^2 / 2m; shape (..., levels)."""
    n = np.array(basis(levels))
    momenta = np.asarray(p, dtype=float)[..., None] + 2.0 * HBAR * K_L * n
    return momenta ** 2 / (2.0 * MASS)


def five_level_hamiltonian(p: float, t: float, pulse: PulseSpec, levels: int = 5) -> np.ndarray:
    """Truncated double Bragg Hamiltonian at quasi-momentum ``p`` and time ``t``.

    Kinetic energies on the diagonal; hbar Omega(t) [cos Phi_L(t) + eps_pol]
    between nearest momentum neighbours. No rotating-wave approximation and
    no gravity term.
    """
    h = float(pulse.coupling(t)) * HBAR * coupling_matrix(levels)
    return h + np.diag(kinetic_energies(p, levels))


@dataclass(frozen=True)
class SMatrix:
    """Pulse S-matrix at one quasi-momentum."""
    entries: np.ndarray
    p: float
    label: str = ""

    @property
    def levels(self) -> int:
        return self.entries.shape[0]

    def probability(self, out: int, inp: int) -> float:
        """|S_{out,inp}|^2 with 0-based indices in the basis order."""
        return float(abs(self.entries[out, inp]) ** 2)

    def unitarity_defect(self) -> float:
        """max |S^dagger S - 1|, the truncation leakage."""
        s = self.entries
        return float(np.max(np.abs(s.conj().T @ s - np.eye(self.levels))))


def _rk4(rhs, y0: np.ndarray, t_start: float, t_end: float, dt: float) -> np.ndarray:
    n_steps = max(1, int(np.ceil((t_end - t_start) / dt - 1e-9)))
    h = (t_end - t_start) / n_steps
    y = y0
    t = t_start
    for _ in range(n_steps):
        k1 = rhs(t, y)
        k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
        k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
        k4 = rhs(t + h, y + h * k3)
        y = y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t += h
    return y


def _propagate_batch(pulse: PulseSpec, p: np.ndarray, levels: int, rtol: float,
                     method: str) -> np.ndarray:
    energies = kinetic_energies(p, levels) / HBAR
    adjacency = coupling_matrix(levels)
    shape = (p.size, levels, levels)
    t_start, t_end = pulse.window

    def rhs(t, y):
        u = y.reshape(shape)
        du = -1j * (energies[:, :, None] * u + float(pulse.coupling(t)) * (adjacency @ u))
        return du.reshape(-1)

    y0 = np.broadcast_to(np.eye(levels, dtype=complex), shape).reshape(-1).copy()
    if method == "rk4":
        u = _rk4(rhs, y0, t_start, t_end, FIXED_STEP).reshape(shape)
    else:
        sol = solve_ivp(rhs, (t_start, t_end), y0, method=method, rtol=rtol, atol=ATOL)
        if not sol.success:
            worst = float(sol.t[-1]) if sol.t.size else t_start
            logger.error(f"{method} failed on {pulse.label or 'pulse'}: {sol.message}")
            raise IntegrationError(f"{method} did not reach rtol={rtol:g}: {sol.message}", worst)
        logger.debug(f"{method} took {sol.nfev} evaluations for {p.size} momenta")
        u = sol.y[:, -1].reshape(shape)

    # strip kinetic phases at the window ends, referenced to the pulse center
    t0 = pulse.center
    left = np.exp(1j * energies * (t_end - t0))
    right = np.exp(1j * energies * (t0 - t_start))
    return left[:, :, None] * u * right[:, None, :]


def pulse_smatrices(pulse: PulseSpec, p_values: Union[Sequence[float], np.ndarray],
                    levels: int = 5, rtol: float = RTOL, method: str = "DOP853") -> np.ndarray:
    """S-matrices of ``pulse`` for many quasi-momenta at once.

    Args:
        pulse: The light pulse
        p_values: Quasi-momenta in hbar k_L
        levels: 5 or 7 basis levels
        rtol: Relative tolerance of the adaptive integrator
        method: A scipy ``solve_ivp`` method, or "rk4" for fixed steps of 1e-3

    Returns:
        Complex array of shape (len(p_values), levels, levels)
    """
    basis(levels)
    p = np.atleast_1d(np.asarray(p_values, dtype=float))
    out = np.empty((p.size, levels, levels), dtype=complex)
    if pulse.envelope.omega_peak == 0.0:
        out[:] = np.eye(levels)
        return out
    for start in range(0, p.size, BATCH_SIZE):
        chunk = p[start:start + BATCH_SIZE]
        out[start:start + chunk.size] = _propagate_batch(pulse, chunk, levels, rtol, method)
    return out


def pulse_smatrix(p: float, pulse: PulseSpec, levels: int = 5, rtol: float = RTOL,
                  method: str = "DOP853") -> SMatrix:
    return SMatrix(pulse_smatrices(pulse, [p], levels, rtol, method)[0], float(p), pulse.label)


def _fetch(pulse: PulseSpec, p: np.ndarray, levels: int,
           repo: Optional["SMatrixRepo"]) -> np.ndarray:
    if repo is not None:
        return repo.get_many(pulse, p, levels)
    return pulse_smatrices(pulse, p, levels)


def efficiency_from_smatrices(s: np.ndarray, kind: PulseKind) -> np.ndarray:
    """F_BS = |B_21|^2 + |B_31|^2 or F_M+ = |M_32|^2 for stacked S-matrices."""
    if kind is PulseKind.BS:
        return np.abs(s[..., 1, 0]) ** 2 + np.abs(s[..., 2, 0]) ** 2
    return np.abs(s[..., 2, 1]) ** 2


def _as_output(values: np.ndarray, p) -> Union[float, np.ndarray]:
    return float(values[0]) if np.ndim(p) == 0 else values


def bs_efficiency(p, pulse: PulseSpec, repo: Optional["SMatrixRepo"] = None):
    """F_BS(p) = P(|p> -> |p+2>) + P(|p> -> |p-2>)."""
    s = _fetch(pulse, np.atleast_1d(p), 5, repo)
    return _as_output(efficiency_from_smatrices(s, PulseKind.BS), p)


def mirror_efficiency_right(p, pulse: PulseSpec, repo: Optional["SMatrixRepo"] = None):
    """F_M+(p) = P(|p+2> -> |p-2>)."""
    s = _fetch(pulse, np.atleast_1d(p), 5, repo)
    return _as_output(np.abs(s[:, 2, 1]) ** 2, p)


def mirror_efficiency_left(p, pulse: PulseSpec, repo: Optional["SMatrixRepo"] = None):
    """F_M-(p) = P(|p-2> -> |p+2>)."""
    s = _fetch(pulse, np.atleast_1d(p), 5, repo)
    return _as_output(np.abs(s[:, 1, 2]) ** 2, p)


def pointwise_efficiency(p, pulse: PulseSpec, kind: PulseKind,
                         repo: Optional["SMatrixRepo"] = None):
    if kind is PulseKind.BS:
        return bs_efficiency(p, pulse, repo)
    return mirror_efficiency_right(p, pulse, repo)


def gaussian_nodes(p_center: float, sigma_p: float, nodes: int) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes over p_center +- 5 sigma_p, weighted by N(p_center, sigma_p^2).

    Weights are renormalized to sum to one over the truncated window.
    """
    if sigma_p <= 0:
        raise ConfigError("sigma_p must be positive")
    if nodes < MIN_QUADRATURE_NODES:
        raise ConfigError(f"at least {MIN_QUADRATURE_NODES} quadrature nodes are required")
    x, w = leggauss(nodes)
    half = QUADRATURE_SPAN * sigma_p
    p = p_center + half * x
    weights = w * np.exp(-((p - p_center) ** 2) / (2.0 * sigma_p ** 2))
    return p, weights / weights.sum()


def check_zone(p_center: float, sigma_p: float):
    """The quadrature window must stay inside the first Brillouin zone."""
    if abs(p_center) + QUADRATURE_SPAN * sigma_p >= HBAR * K_L:
        raise ConfigError(
            f"Gaussian (p={p_center:.4g}, sigma_p={sigma_p:.4g}) is not supported "
            f"inside the first Brillouin zone"
        )


def integrated_efficiency(pulse: PulseSpec, kind: PulseKind, p0: float, sigma_p: float,
                          nodes: int = 65, repo: Optional["SMatrixRepo"] = None,
                          tol: float = QUADRATURE_TOL) -> float:
    """Pulse efficiency averaged over a Gaussian momentum distribution.

    Args:
        pulse: Beam-splitter or mirror pulse
        kind: Which efficiency to average (F_BS or F_M+)
        p0: Mean momentum, folded to its quasi-momentum
        sigma_p: Momentum width
        nodes: Gauss-Legendre nodes; the result is checked against 2*nodes
        repo: Optional S-matrix cache
        tol: Allowed change on node doubling

    Returns:
        The averaged efficiency in [0, 1]
    """
    p_bar = quasi_momentum(p0)
    check_zone(p_bar, sigma_p)

    def average(n: int) -> float:
        p, weights = gaussian_nodes(p_bar, sigma_p, n)
        return float(np.dot(weights, pointwise_efficiency(p, pulse, kind, repo)))

    coarse, fine = average(nodes), average(2 * nodes)
    if abs(fine - coarse) > tol:
        logger.error(f"Quadrature changed by {abs(fine - coarse):.3g} on node doubling")
        raise QuadratureError(
            f"efficiency not converged: {coarse:.8f} with {nodes} nodes, "
            f"{fine:.8f} with {2 * nodes}"
        )
    logger.debug(f"{pulse.label or kind.value} efficiency {fine:.6f} (p0={p0}, sigma_p={sigma_p})")
    return fine


@dataclass
class EfficiencyLandscape:
    """F(p, eps_pol) on a rectangular grid; ``values[i, j]`` at (eps[i], p[j])."""
    p: np.ndarray
    eps: np.ndarray
    values: np.ndarray
    kind: PulseKind

    def rows(self) -> Iterator[Tuple[float, float, float]]:
        for i, eps in enumerate(self.eps):
            for j, p in enumerate(self.p):
                yield float(p), float(eps), float(self.values[i, j])

    def argmax(self) -> Tuple[float, float, float]:
        i, j = np.unravel_index(int(np.argmax(self.values)), self.values.shape)
        return float(self.p[j]), float(self.eps[i]), float(self.values[i, j])


def efficiency_landscape(pulse: PulseSpec, kind: PulseKind,
                         p_range: Tuple[float, float], eps_range: Tuple[float, float],
                         resolution: Union[int, Tuple[int, int]],
                         repo: Optional["SMatrixRepo"] = None) -> EfficiencyLandscape:
    """Pointwise efficiency over quasi-momentum and polarization error.

    ``resolution`` is the number of samples per axis, or a (n_p, n_eps) pair.
    """
    n_p, n_eps = (resolution, resolution) if isinstance(resolution, int) else resolution
    if n_p < 1 or n_eps < 1:
        raise ConfigError("landscape resolution must be positive")
    if not (-1.0 <= p_range[0] <= p_range[1] <= 1.0):
        raise ConfigError(f"p range {p_range} must lie in [-1, 1]")
    if not (0.0 <= eps_range[0] <= eps_range[1] <= 0.2):
        raise ConfigError(f"eps_pol range {eps_range} must lie in [0, 0.2]")
    p = np.linspace(*p_range, n_p)
    eps = np.linspace(*eps_range, n_eps)
    values = np.empty((n_eps, n_p))
    for i, e in enumerate(eps):
        values[i] = pointwise_efficiency(p, replace(pulse, eps_pol=float(e)), kind, repo)
    logger.info(f"Computed {n_eps}x{n_p} {kind.value} landscape for {pulse.label or 'pulse'}")
    return EfficiencyLandscape(p, eps, values, kind)


def transition_probabilities(pulse: PulseSpec, kind: PulseKind, p_values,
                             levels: int = 5,
                             repo: Optional["SMatrixRepo"] = None) -> np.ndarray:
    """Outgoing probabilities into every level for the pulse's input state.

    Beam-splitters start in |p> and mirrors in |p + 2 hbar k_L>. Returns an
    array of shape (len(p_values), levels), columns in the basis order.
    """
    p = np.atleast_1d(np.asarray(p_values, dtype=float))
    s = repo.get_many(pulse, p, levels) if repo is not None else pulse_smatrices(pulse, p, levels)
    column = 0 if kind is PulseKind.BS else 1
    return np.abs(s[:, :, column]) ** 2
