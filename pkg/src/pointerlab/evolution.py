"""Block decomposition of joint propagators and state propagation on time grids.

A joint unitary on qubit (x) environment is written as::

    U = E1 |a><a| + E2 |a><b| + E3 |b><a| + E4 |b><b|

with environment-space operators ``E1..E4``. In the system-major layout of
:mod:`pointerlab.hilbert` this is the block matrix ``[[E1, E2], [E3, E4]]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .exceptions import InvalidArgumentError, NumericFailureError, TruncationError
from .hilbert import (
    KET_A,
    KET_B,
    BipartiteState,
    as_operator,
    dagger,
    is_hermitian,
    matrix_exponential_unitary,
)

LEAKAGE_TOL = 1e-6
NORM_TOL = 1e-9


def _frozen(x):
    a = np.array(x, dtype=complex)
    a.setflags(write=False)
    return a


def _basis_matrix(system_basis) -> np.ndarray:
    a, b = (np.asarray(v, dtype=complex) for v in system_basis)
    if a.shape != (2,) or b.shape != (2,):
        raise InvalidArgumentError("system basis vectors must be 2-dimensional")
    W = np.column_stack([a, b])
    if np.max(np.abs(dagger(W) @ W - np.eye(2))) > 1e-12:
        raise InvalidArgumentError("system basis must be orthonormal within 1e-12")
    return W


@dataclass(frozen=True)
class EvolutionDecomposition:
    """The four environment operators of a joint propagator at time ``t``.

    ``basis`` is the system basis (|a>, |b>) the blocks refer to, given in
    computational coordinates.
    """

    E1: np.ndarray
    E2: np.ndarray
    E3: np.ndarray
    E4: np.ndarray
    t: float = 0.0
    basis: tuple = field(default=(KET_A, KET_B), repr=False)

    def __post_init__(self):
        E1 = as_operator(self.E1)
        d = E1.shape[0]
        blocks = [E1] + [as_operator(getattr(self, k), dim=d) for k in ("E2", "E3", "E4")]
        for k, m in zip(("E1", "E2", "E3", "E4"), blocks):
            object.__setattr__(self, k, _frozen(m))
        object.__setattr__(self, "basis", tuple(_frozen(v) for v in self.basis))

    @property
    def env_dim(self) -> int:
        return self.E1.shape[0]

    @property
    def blocks(self):
        return self.E1, self.E2, self.E3, self.E4

    @classmethod
    def identity(cls, env_dim: int, t: float = 0.0) -> "EvolutionDecomposition":
        eye = np.eye(env_dim, dtype=complex)
        zero = np.zeros_like(eye)
        return cls(eye, zero, zero, eye, t=t)

    def assemble(self, computational: bool = True) -> np.ndarray:
        """Full 2D x 2D operator; rotated back to the computational basis by default."""
        U = np.block([[self.E1, self.E2], [self.E3, self.E4]])
        if computational:
            W = np.kron(_basis_matrix(self.basis), np.eye(self.env_dim))
            U = W @ U @ dagger(W)
        return U

    def apply(self, state: BipartiteState) -> BipartiteState:
        """Propagate a state written in the same system basis as the blocks."""
        A, B = state.A, state.B
        return BipartiteState(self.E1 @ A + self.E2 @ B, self.E3 @ A + self.E4 @ B)


def decompose(U, system_basis=None, t: float = 0.0, unitary_tol: float = 1e-9) -> EvolutionDecomposition:
    """Split a joint unitary into its environment blocks E1..E4.

    Parameters
    ----------
    U : (2D, 2D) array
        Joint propagator in the computational system-major layout.
    system_basis : pair of 2-vectors, optional
        Orthonormal system basis (|a>, |b>); defaults to the computational one.
    t : float
        Time stamp recorded on the result.
    """
    U = as_operator(U)
    if U.shape[0] % 2:
        raise InvalidArgumentError("joint operator dimension must be even")
    if np.max(np.abs(dagger(U) @ U - np.eye(U.shape[0]))) > unitary_tol:
        raise InvalidArgumentError("decompose requires a unitary operator")
    d = U.shape[0] // 2
    basis = (KET_A, KET_B) if system_basis is None else tuple(system_basis)
    W = np.kron(_basis_matrix(basis), np.eye(d))
    Ub = dagger(W) @ U @ W
    return EvolutionDecomposition(Ub[:d, :d], Ub[:d, d:], Ub[d:, :d], Ub[d:, d:], t=t, basis=basis)


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing sample times starting at 0."""

    points: np.ndarray
    units: str = "1/g"

    def __post_init__(self):
        p = np.asarray(self.points, dtype=float)
        if p.ndim != 1 or p.size < 2:
            raise InvalidArgumentError("time grid needs at least 2 points")
        if p[0] != 0.0:
            raise InvalidArgumentError("time grid must start at 0")
        if np.any(np.diff(p) <= 0):
            raise InvalidArgumentError("time grid must be strictly increasing")
        p = p.copy()
        p.setflags(write=False)
        object.__setattr__(self, "points", p)

    @classmethod
    def linspace(cls, t_max: float, n: int, units: str = "1/g") -> "TimeGrid":
        if t_max <= 0:
            raise InvalidArgumentError("t_max must be positive")
        return cls(np.linspace(0.0, t_max, n), units)

    def refined(self) -> "TimeGrid":
        """Grid with every interval bisected."""
        p = self.points
        mid = 0.5 * (p[:-1] + p[1:])
        out = np.empty(2 * p.size - 1)
        out[0::2] = p
        out[1::2] = mid
        return TimeGrid(out, self.units)

    def __len__(self):
        return self.points.size

    def __iter__(self):
        return iter(self.points)


class EvolutionModel:
    """Something that yields a joint propagator decomposition at any time.

    Subclasses set ``env_dim`` and ``truncated`` and implement
    :meth:`evolution`.  ``truncated`` marks a Fock-truncated environment, where
    population reaching the top retained level signals leakage.
    """

    env_dim: int
    truncated: bool = False

    def evolution(self, t: float) -> EvolutionDecomposition:
        raise NotImplementedError

    def evolutions(self, times) -> list:
        return [self.evolution(float(t)) for t in times]


def interaction_picture(H_S, H_E, H_prime, t: float) -> np.ndarray:
    """exp(i H0 t) H' exp(-i H0 t) with H0 = H_S (x) I + I (x) H_E."""
    H_S = as_operator(H_S, dim=2)
    H_E = as_operator(H_E)
    d = H_E.shape[0]
    H_prime = as_operator(H_prime)
    if H_prime.shape[0] != 2 * d:
        raise InvalidArgumentError(
            f"H' has dimension {H_prime.shape[0]}, expected 2 * {d} from H_E"
        )
    for name, m in (("H_S", H_S), ("H_E", H_E), ("H'", H_prime)):
        if not is_hermitian(m, 1e-10 * max(1.0, float(np.max(np.abs(m))))):
            raise InvalidArgumentError(f"{name} must be Hermitian")
    U0 = np.kron(matrix_exponential_unitary(H_S, t), matrix_exponential_unitary(H_E, t))
    return dagger(U0) @ H_prime @ U0


def _midpoint_product(hamiltonian, t0, t1, steps):
    dt = (t1 - t0) / steps
    U = None
    for k in range(steps):
        step = matrix_exponential_unitary(hamiltonian(t0 + (k + 0.5) * dt), dt)
        U = step if U is None else step @ U
    return U


def time_ordered_exponential(
    hamiltonian: Callable[[float], np.ndarray],
    t0: float,
    t1: float,
    steps: int = 16,
    fidelity_tol: float = 1e-9,
    max_steps: int = 1 << 16,
) -> np.ndarray:
    """Time-ordered exp(-i int H dt) by exponential-midpoint splitting.

    The step count doubles until the propagator changes by less than
    ``fidelity_tol`` in ``1 - |Tr(U_n^dag U_2n)| / dim``.
    """
    if t1 == t0:
        H = as_operator(hamiltonian(t0))
        return np.eye(H.shape[0], dtype=complex)
    U = _midpoint_product(hamiltonian, t0, t1, steps)
    while True:
        steps *= 2
        U2 = _midpoint_product(hamiltonian, t0, t1, steps)
        change = 1.0 - abs(np.trace(dagger(U) @ U2)) / U.shape[0]
        if change < fidelity_tol:
            return U2
        if steps >= max_steps:
            raise NumericFailureError(
                f"time-ordered exponential did not converge within {max_steps} steps", time=t1
            )
        U = U2


class HamiltonianModel(EvolutionModel):
    """Constant total Hamiltonian H = H_S (x) I + I (x) H_E + H'.

    ``picture="interaction"`` returns exp(i H0 t) exp(-i H t); the
    ``"schrodinger"`` picture returns exp(-i H t).
    """

    def __init__(self, H_S, H_E, H_prime, picture: str = "interaction", truncated: bool = False):
        if picture not in ("interaction", "schrodinger"):
            raise InvalidArgumentError(f"unknown picture {picture!r}")
        self.H_S = as_operator(H_S, dim=2)
        self.H_E = as_operator(H_E)
        self.env_dim = self.H_E.shape[0]
        self.H_prime = as_operator(H_prime, dim=2 * self.env_dim)
        self.picture = picture
        self.truncated = truncated
        eye = np.eye(self.env_dim)
        self.H0 = np.kron(self.H_S, eye) + np.kron(np.eye(2), self.H_E)
        self.H = self.H0 + self.H_prime
        for name, m in (("H_S", self.H_S), ("H_E", self.H_E), ("H'", self.H_prime)):
            if not is_hermitian(m, 1e-10 * max(1.0, float(np.max(np.abs(m))))):
                raise InvalidArgumentError(f"{name} must be Hermitian")
        self._w, self._v = np.linalg.eigh(self.H)
        self._w0, self._v0 = np.linalg.eigh(self.H0)

    def propagator(self, t: float) -> np.ndarray:
        U = (self._v * np.exp(-1j * self._w * t)) @ dagger(self._v)
        if self.picture == "interaction":
            U = (self._v0 * np.exp(1j * self._w0 * t)) @ dagger(self._v0) @ U
        return U

    def evolution(self, t: float) -> EvolutionDecomposition:
        return decompose(self.propagator(t), t=t)

    def interaction_hamiltonian(self, t: float) -> np.ndarray:
        return interaction_picture(self.H_S, self.H_E, self.H_prime, t)


class TimeDependentModel(EvolutionModel):
    """Joint propagator of a user-supplied H(t) on the full 2D-dimensional space."""

    def __init__(self, hamiltonian: Callable[[float], np.ndarray], env_dim: int,
                 fidelity_tol: float = 1e-9, truncated: bool = False):
        self.hamiltonian = hamiltonian
        self.env_dim = env_dim
        self.fidelity_tol = fidelity_tol
        self.truncated = truncated

    def evolution(self, t: float) -> EvolutionDecomposition:
        U = time_ordered_exponential(self.hamiltonian, 0.0, t, fidelity_tol=self.fidelity_tol)
        return decompose(U, t=t)

    def evolutions(self, times) -> list:
        out, U, prev = [], np.eye(2 * self.env_dim, dtype=complex), 0.0
        for t in times:
            t = float(t)
            if t > prev:
                U = time_ordered_exponential(self.hamiltonian, prev, t,
                                             fidelity_tol=self.fidelity_tol) @ U
            out.append(decompose(U, t=t))
            prev = t
        return out


def propagate(
    initial: BipartiteState,
    model: EvolutionModel,
    grid: TimeGrid | Sequence[float],
    evolutions: Sequence[EvolutionDecomposition] | None = None,
    leakage_tol: float = LEAKAGE_TOL,
) -> list:
    """States A(t) = E1 A0 + E2 B0, B(t) = E3 A0 + E4 B0 at every grid time.

    Raises :class:`TruncationError` when a truncated environment puts more than
    ``leakage_tol`` of the norm into its top retained level.
    """
    if abs(initial.norm2 - 1.0) > 1e-10:
        raise InvalidArgumentError("initial state must be normalized")
    times = grid.points if isinstance(grid, TimeGrid) else np.asarray(grid, dtype=float)
    if evolutions is None:
        evolutions = model.evolutions(times)
    out = []
    for t, dec in zip(times, evolutions):
        s = dec.apply(initial)
        if abs(s.norm2 - 1.0) > NORM_TOL:
            raise NumericFailureError(f"norm drifted to {s.norm2!r} at t={t}", time=float(t))
        if getattr(model, "truncated", False):
            leak = abs(s.A[-1]) ** 2 + abs(s.B[-1]) ** 2
            if leak > leakage_tol:
                raise TruncationError(
                    f"population {leak:.3e} in the top retained level at t={t}", time=float(t)
                )
        out.append(s)
    return out

