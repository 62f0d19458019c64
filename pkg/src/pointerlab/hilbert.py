"""Dense linear algebra for a two-level system coupled to a finite environment.

State vectors are 1-D complex ``numpy`` arrays and operators are square 2-D
complex arrays. A pure state of system (x) environment is stored as the pair
of environment vectors multiplying the system basis states::

    |psi> = A (x) |a> + B (x) |b>

The flattened full-space vector is system-major, ``concatenate([A, B])``, so a
full-space operator is the 2x2 block matrix ``[[E1, E2], [E3, E4]]`` with
``E1 = <a|U|a>`` and so on.

Inner products are conjugate-linear in the first argument everywhere:
``inner(x, y) = sum(conj(x) * y)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import InvalidArgumentError, NumericFailureError

DEGENERACY_TOL = 1e-6
_CLAMP_FLOOR = -1e-12
_ENTROPY_FLOOR = 1e-15

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
SIGMA_PLUS = np.array([[0, 1], [0, 0]], dtype=complex)  # |a><b|
SIGMA_MINUS = np.array([[0, 0], [1, 0]], dtype=complex)  # |b><a|
KET_A = np.array([1, 0], dtype=complex)
KET_B = np.array([0, 1], dtype=complex)


def as_state(x, dim=None) -> np.ndarray:
    """Validate and return ``x`` as a finite 1-D complex array."""
    v = np.asarray(x, dtype=complex)
    if v.ndim != 1 or v.size == 0:
        raise InvalidArgumentError(f"state must be a non-empty 1-D array, got shape {v.shape}")
    if dim is not None and v.size != dim:
        raise InvalidArgumentError(f"state has {v.size} amplitudes, expected {dim}")
    if not np.all(np.isfinite(v)):
        raise InvalidArgumentError("state amplitudes must be finite")
    return v


def as_operator(x, dim=None) -> np.ndarray:
    """Validate and return ``x`` as a finite square complex matrix."""
    m = np.asarray(x, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        raise InvalidArgumentError(f"operator must be square, got shape {m.shape}")
    if dim is not None and m.shape[0] != dim:
        raise InvalidArgumentError(f"operator has dimension {m.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(m)):
        raise InvalidArgumentError("operator entries must be finite")
    return m


def inner(x, y) -> complex:
    """<x|y>, conjugate-linear in ``x``."""
    return complex(np.vdot(x, y))


def norm2(x) -> float:
    return float(np.vdot(x, x).real)


def normalize(x) -> np.ndarray:
    v = np.asarray(x, dtype=complex)
    n = np.sqrt(norm2(v))
    if n == 0.0:
        raise InvalidArgumentError("cannot normalize the zero vector")
    return v / n


def fidelity(x, y) -> float:
    """|<x|y>|^2 / (||x||^2 ||y||^2); insensitive to global phase."""
    return abs(inner(x, y)) ** 2 / (norm2(x) * norm2(y))


def dagger(m) -> np.ndarray:
    return np.conjugate(np.transpose(m))


def op_norm(m) -> float:
    """Spectral (largest singular value) norm; 0 for an empty or zero matrix."""
    m = np.asarray(m)
    if m.size == 0:
        return 0.0
    return float(np.linalg.norm(m, ord=2))


def is_hermitian(m, tol=1e-12) -> bool:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    return bool(np.max(np.abs(m - dagger(m)), initial=0.0) <= tol)


def is_unitary(m, tol=1e-12) -> bool:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    eye = np.eye(m.shape[0])
    return bool(np.max(np.abs(dagger(m) @ m - eye), initial=0.0) <= tol)


def commutator(x, y) -> np.ndarray:
    return x @ y - y @ x


def basis_state(dim: int, index: int) -> np.ndarray:
    if not 0 <= index < dim:
        raise InvalidArgumentError(f"basis index {index} outside [0, {dim})")
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def _frozen(x) -> np.ndarray:
    a = np.array(x, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class BipartiteState:
    """Pure state ``A (x) |a> + B (x) |b>`` of a qubit and a D-level environment."""

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = as_state(self.A)
        B = as_state(self.B, dim=A.size)
        object.__setattr__(self, "A", _frozen(A))
        object.__setattr__(self, "B", _frozen(B))

    @property
    def env_dim(self) -> int:
        return self.A.size

    @property
    def norm2(self) -> float:
        return norm2(self.A) + norm2(self.B)

    @property
    def vector(self) -> np.ndarray:
        """Flattened system-major vector of length 2 * env_dim."""
        return np.concatenate([self.A, self.B])

    @classmethod
    def from_vector(cls, psi, env_dim: int) -> "BipartiteState":
        psi = as_state(psi, dim=2 * env_dim)
        return cls(psi[:env_dim], psi[env_dim:])

    def scaled(self, z: complex) -> "BipartiteState":
        return BipartiteState(z * self.A, z * self.B)


@dataclass(frozen=True)
class SchmidtDecomposition:
    coefficients: np.ndarray
    system_states: list = field(repr=False)
    env_states: list = field(repr=False)
    degenerate: bool

    def reconstruct(self) -> BipartiteState:
        A = np.zeros(self.env_states[0].size, dtype=complex)
        B = np.zeros_like(A)
        for lam, s, e in zip(self.coefficients, self.system_states, self.env_states):
            A += lam * s[0] * e
            B += lam * s[1] * e
        return BipartiteState(A, B)


def _require_normalized(state: BipartiteState, tol=1e-8):
    if abs(state.norm2 - 1.0) > tol:
        raise InvalidArgumentError(f"state norm^2 is {state.norm2!r}, expected 1 within {tol}")


def tensor(sys, env) -> BipartiteState:
    """Product state ``sys (x) env``; both factors must be normalized."""
    sys = as_state(sys, dim=2)
    env = np.asarray(env, dtype=complex)
    if env.ndim != 1 or env.size == 0:
        raise InvalidArgumentError("environment state must have dimension >= 1")
    env = as_state(env)
    for name, v in (("system", sys), ("environment", env)):
        if abs(norm2(v) - 1.0) > 1e-10:
            raise InvalidArgumentError(f"{name} factor is not normalized (norm^2={norm2(v)!r})")
    return BipartiteState(sys[0] * env, sys[1] * env)


def partial_trace_system(state: BipartiteState) -> np.ndarray:
    """Reduced density matrix of the qubit.

    ``rho[0, 0] = ||A||^2``, ``rho[0, 1] = <B, A>``, ``rho[1, 1] = ||B||^2``.
    """
    _require_normalized(state)
    A, B = state.A, state.B
    rab = np.vdot(B, A)
    return np.array([[norm2(A), rab], [np.conj(rab), norm2(B)]], dtype=complex)


def _reduced_eigenvalues(rho) -> np.ndarray:
    p = np.linalg.eigvalsh(rho)
    if p.min() < _CLAMP_FLOOR:
        raise NumericFailureError(f"reduced density matrix has eigenvalue {p.min():.3e} < 0")
    return np.clip(p, 0.0, None)


def schmidt(state: BipartiteState, degeneracy_tol: float = DEGENERACY_TOL) -> SchmidtDecomposition:
    """Schmidt form via the SVD of the 2 x D coefficient matrix.

    States are returned up to a global phase per pair; only ``lambda_i s_i e_i``
    is fixed.
    """
    _require_normalized(state)
    M = np.vstack([state.A, state.B])
    u, s, vh = np.linalg.svd(M, full_matrices=False)
    sys_states = [u[:, i].copy() for i in range(s.size)]
    env_states = [vh[i, :].copy() for i in range(s.size)]
    degenerate = bool(s.size > 1 and abs(s[0] - s[1]) < degeneracy_tol)
    return SchmidtDecomposition(s, sys_states, env_states, degenerate)


def entanglement_entropy(state: BipartiteState) -> float:
    """Von Neumann entropy of the reduced qubit state, in nats."""
    p = _reduced_eigenvalues(partial_trace_system(state))
    p = p[p >= _ENTROPY_FLOOR]
    return float(min(max(-np.sum(p * np.log(p)), 0.0), np.log(2.0)))


def purity(rho) -> float:
    """Tr[rho^2]."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise InvalidArgumentError(f"density matrix must be square, got shape {rho.shape}")
    return float(np.real(np.trace(rho @ rho)))


def matrix_exponential_unitary(H, t: float) -> np.ndarray:
    """exp(-i H t) from the eigendecomposition of a Hermitian ``H``.

    Going through ``eigh`` keeps the result unitary to machine precision for
    any ``t``, which a truncated series would not.
    """
    H = as_operator(H)
    scale = max(1.0, float(np.max(np.abs(H))))
    if np.max(np.abs(H - dagger(H))) > 1e-10 * scale:
        raise InvalidArgumentError("matrix_exponential_unitary requires a Hermitian operator")
    w, v = np.linalg.eigh(0.5 * (H + dagger(H)))
    return (v * np.exp(-1j * w * t)) @ dagger(v)


def random_state(dim: int, rng) -> np.ndarray:
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def random_unitary(dim: int, rng) -> np.ndarray:
    """Haar-random unitary via QR with the phase fix."""
    z = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_hermitian(dim: int, rng, scale: float = 1.0) -> np.ndarray:
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return scale * 0.5 * (z + dagger(z))
