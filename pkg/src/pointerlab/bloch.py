"""Bloch-vector trajectories of the reduced qubit and their long-time limit."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .evolution import TimeGrid
from .exceptions import InvalidArgumentError
from .hilbert import SIGMA_X, SIGMA_Y, SIGMA_Z, partial_trace_system

WINDOW_FRACTION = 0.25
SETTLE_TOL = 0.02
POLARIZATION_FLOOR = 0.05


def bloch_vector(rho) -> np.ndarray:
    """(R_x, R_y, R_z) with rho = (I + R . sigma) / 2.

    Raises
    ------
    InvalidArgumentError
        ``rho`` is not a 2 x 2 Hermitian matrix of unit trace (within 1e-8).
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (2, 2):
        raise InvalidArgumentError(f"expected a 2x2 density matrix, got shape {rho.shape}")
    if np.max(np.abs(rho - rho.conj().T)) > 1e-8 or abs(np.trace(rho) - 1.0) > 1e-8:
        raise InvalidArgumentError("density matrix must be Hermitian with unit trace")
    rab, rba = rho[0, 1], rho[1, 0]
    return np.array([(rab + rba).real, (1j * (rab - rba)).real, (rho[0, 0] - rho[1, 1]).real])


def reconstruct(R) -> np.ndarray:
    R = np.asarray(R, dtype=float)
    if R.shape != (3,):
        raise InvalidArgumentError("Bloch vector must have 3 components")
    return 0.5 * (np.eye(2) + R[0] * SIGMA_X + R[1] * SIGMA_Y + R[2] * SIGMA_Z)


@dataclass(frozen=True)
class BlochTrajectory:
    times: np.ndarray
    R: np.ndarray = field(repr=False)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        R = np.asarray(self.R, dtype=float)
        if R.shape != (t.size, 3):
            raise InvalidArgumentError(f"R must have shape ({t.size}, 3), got {R.shape}")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "R", R)

    @property
    def lengths(self) -> np.ndarray:
        return np.linalg.norm(self.R, axis=1)


def trajectory(states, grid) -> BlochTrajectory:
    times = grid.points if isinstance(grid, TimeGrid) else np.asarray(grid, dtype=float)
    states = list(states)
    if len(states) != len(times):
        raise InvalidArgumentError(f"{len(states)} states for {len(times)} grid times")
    return BlochTrajectory(times, np.array([bloch_vector(partial_trace_system(s)) for s in states]))


@dataclass(frozen=True)
class AsymptoteReport:
    """Outcome of the long-time test.

    ``preferred_basis`` is None unless the trajectory settled onto a
    polarization of at least ``polarization_floor``; a settled but nearly
    unpolarized limit leaves the basis undetermined.
    """

    settled: bool
    window: tuple
    R_inf: np.ndarray
    drift: float
    preferred_basis: tuple | None
    window_fraction: float
    settle_tol: float
    polarization_floor: float

    @property
    def unpolarized(self) -> bool:
        return self.settled and self.preferred_basis is None


def _polarization_basis(R):
    """Eigenvectors of (I + R.sigma)/2, larger eigenvalue first."""
    w, v = np.linalg.eigh(reconstruct(R))
    return (v[:, 1].copy(), v[:, 0].copy())


def detect_asymptote(traj: BlochTrajectory, window_fraction: float = WINDOW_FRACTION,
                     settle_tol: float = SETTLE_TOL,
                     polarization_floor: float = POLARIZATION_FLOOR) -> AsymptoteReport:
    """Decide whether R(t) has settled over the trailing part of the record.

    The window is the last ``window_fraction`` of the time span.  The
    trajectory counts as settled when no component varies by more than
    ``settle_tol`` inside it.
    """
    t = traj.times
    if t.size < 10:
        raise InvalidArgumentError("asymptote detection needs at least 10 grid points")
    if not 0 < window_fraction <= 0.5:
        raise InvalidArgumentError("window_fraction must lie in (0, 0.5]")
    t_start = t[-1] - window_fraction * (t[-1] - t[0])
    mask = t >= t_start - 1e-12 * max(1.0, abs(t[-1]))
    Rw = traj.R[mask]
    drift = float(np.max(Rw.max(axis=0) - Rw.min(axis=0)))
    R_inf = Rw.mean(axis=0)
    settled = drift <= settle_tol
    basis = None
    if settled and np.linalg.norm(R_inf) >= polarization_floor:
        basis = _polarization_basis(R_inf)
    return AsymptoteReport(settled, (float(t[mask][0]), float(t[-1])), R_inf, drift, basis,
                           window_fraction, settle_tol, polarization_floor)


def trailing_window_max(traj: BlochTrajectory, component: int,
                        window_fraction: float = WINDOW_FRACTION) -> float:
    """max |R_component| over the trailing window."""
    t = traj.times
    mask = t >= t[-1] - window_fraction * (t[-1] - t[0]) - 1e-12 * max(1.0, abs(t[-1]))
    return float(np.max(np.abs(traj.R[mask, component])))
