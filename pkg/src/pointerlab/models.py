"""The three concrete qubit-environment models and their environment states.

Units: hbar = 1, angular frequencies in rad per time unit.  Fock spaces are
truncated at ``n_trunc`` (the highest retained photon number), so the field
dimension is ``n_trunc + 1``.

* Jaynes-Cummings at exact resonance, interaction picture,
  ``H' = g (a^dag sigma_- + sigma_+ a)``.
* Simplified spin-boson, ``H = w0/2 sz + w a^dag a + sz (x) (g a^dag + g* a)``;
  its interaction-picture propagator is ``exp[sz (x) (lam a^dag - lam* a)]``
  with ``lam(t) = (g/w)(1 - exp(i w t))``.  That operator drops a c-number
  phase, so every comparison against it is phase-insensitive.
* Spin-spin, ``H = -D0/2 sx + 1/2 sz (x) sum_i g_i sz_i`` on N <= 12 spins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.special import gammainc, gammaln

from .evolution import EvolutionDecomposition, EvolutionModel, HamiltonianModel
from .exceptions import CapacityError, InvalidArgumentError, TruncationError
from .hilbert import SIGMA_MINUS, SIGMA_PLUS, SIGMA_X, SIGMA_Z, dagger

COHERENT_TAIL_TOL = 1e-8
SBM_TAIL_TOL = 1e-10
MAX_SPINS = 12


def annihilation(n_trunc: int) -> np.ndarray:
    """Truncated a on span{|0>..|n_trunc>}."""
    return np.diag(np.sqrt(np.arange(1, n_trunc + 1)), k=1).astype(complex)


def number_operator(n_trunc: int) -> np.ndarray:
    return np.diag(np.arange(n_trunc + 1)).astype(complex)


def fock_state(n: int, n_trunc: int) -> np.ndarray:
    if not 0 <= n <= n_trunc:
        raise InvalidArgumentError(f"Fock index {n} outside [0, {n_trunc}]")
    v = np.zeros(n_trunc + 1, dtype=complex)
    v[n] = 1.0
    return v


def coherent_tail_weight(nu: complex, n_trunc: int) -> float:
    """Poisson weight of photon numbers above ``n_trunc``."""
    mu = abs(nu) ** 2
    if mu == 0.0:
        return 0.0
    return float(gammainc(n_trunc + 1, mu))


def coherent_state(nu: complex, n_trunc: int, tail_tol: float = COHERENT_TAIL_TOL) -> np.ndarray:
    """Truncated, renormalized coherent state |nu>.

    Amplitudes come from the log-space form of c_{n+1} = c_n nu / sqrt(n+1),
    which stays finite far beyond n = 170.

    Raises
    ------
    TruncationError
        If more than ``tail_tol`` of the Poisson weight lies above ``n_trunc``.
    """
    if n_trunc < 1:
        raise InvalidArgumentError("n_trunc must be >= 1")
    nu = complex(nu)
    tail = coherent_tail_weight(nu, n_trunc)
    if tail > tail_tol:
        raise TruncationError(
            f"coherent state |nu|^2={abs(nu) ** 2:g} loses weight {tail:.2e} above n={n_trunc}"
        )
    if nu == 0:
        return fock_state(0, n_trunc)
    n = np.arange(n_trunc + 1)
    log_mag = -0.5 * abs(nu) ** 2 + n * math.log(abs(nu)) - 0.5 * gammaln(n + 1)
    c = np.exp(log_mag) * np.exp(1j * n * np.angle(nu))
    return c / np.linalg.norm(c)


def displacement(lam: complex, n_trunc: int) -> np.ndarray:
    """exp(lam a^dag - lam* a) on the truncated Fock space."""
    lam = complex(lam)
    r, theta = abs(lam), np.angle(lam)
    if r == 0.0:
        return np.eye(n_trunc + 1, dtype=complex)
    w, v = _real_displacement_eig(n_trunc)
    D_real = (v * np.exp(-1j * w * r)) @ dagger(v)
    rot = np.exp(1j * theta * np.arange(n_trunc + 1))
    # exp(i th N) D(r) exp(-i th N) = D(r e^{i th})
    return (rot[:, None] * D_real) * np.conj(rot)[None, :]


@lru_cache(maxsize=16)
def _real_displacement_eig(n_trunc: int):
    a = annihilation(n_trunc)
    # D(r) = exp(r (a^dag - a)) = exp(-i r K) with K = i (a^dag - a) Hermitian
    K = 1j * (dagger(a) - a)
    w, v = np.linalg.eigh(K)
    w.setflags(write=False)
    v.setflags(write=False)
    return w, v


@dataclass(frozen=True)
class LadderCoeffs:
    """Matrix elements of E1..E4 in a basis where they shift the index by 0, -1, +1, 0.

    ``E1|n> = f1(n,t)|n>``, ``E2|n> = f2(n,t)|n-1>``, ``E3|n> = f3(n,t)|n+1>``,
    ``E4|n> = f4(n,t)|n>``.  Each callable accepts integer arrays.
    """

    f1: Callable
    f2: Callable
    f3: Callable
    f4: Callable


def default_jcm_truncation(nbar: float) -> int:
    return max(int(math.ceil(nbar + 10.0 * math.sqrt(nbar))), 10)


@dataclass(frozen=True)
class JCMParams(EvolutionModel):
    """Resonant Jaynes-Cummings model with a coherent field ``nu = sqrt(nbar) e^{-i phi}``.

    ``omega`` is the common atom/field frequency; it only enters the
    Schroedinger-picture pieces (``H_S``, ``H_E``) used by the theorem checks.
    """

    nbar: float
    g: float = 1.0
    phi: float = 0.0
    n_trunc: int | None = None
    omega: float = 1.0
    truncated: bool = field(default=True, init=False)

    def __post_init__(self):
        if not self.g > 0:
            raise InvalidArgumentError("JCM coupling g must be positive")
        if self.nbar < 0:
            raise InvalidArgumentError("nbar must be non-negative")
        if self.n_trunc is None:
            object.__setattr__(self, "n_trunc", default_jcm_truncation(self.nbar))
        elif self.n_trunc < self.nbar + 10.0 * math.sqrt(self.nbar):
            raise InvalidArgumentError(
                f"n_trunc={self.n_trunc} < nbar + 10 sqrt(nbar) = "
                f"{self.nbar + 10 * math.sqrt(self.nbar):.1f}"
            )

    @property
    def env_dim(self) -> int:
        return self.n_trunc + 1

    @property
    def nu(self) -> complex:
        return math.sqrt(self.nbar) * complex(math.cos(self.phi), -math.sin(self.phi))

    @property
    def revival_time(self) -> float:
        return 2.0 * math.pi * math.sqrt(self.nbar) / self.g

    def env_initial(self) -> np.ndarray:
        return coherent_state(self.nu, self.n_trunc)

    def evolution(self, t: float) -> EvolutionDecomposition:
        return jcm_env_operators(self, t)

    def ladder_coeffs(self) -> LadderCoeffs:
        return jcm_ladder_coeffs(self)

    def hamiltonian_terms(self):
        """(H_S, H_E, H') in the Schroedinger picture."""
        return (0.5 * self.omega * SIGMA_Z,
                self.omega * number_operator(self.n_trunc),
                jcm_interaction_hamiltonian(self))


def jcm_interaction_hamiltonian(p: JCMParams) -> np.ndarray:
    a = annihilation(p.n_trunc)
    return p.g * (np.kron(SIGMA_MINUS, dagger(a)) + np.kron(SIGMA_PLUS, a))


def jcm_ladder_coeffs(p: JCMParams) -> LadderCoeffs:
    g = p.g
    return LadderCoeffs(
        f1=lambda n, t: np.cos(g * t * np.sqrt(np.asarray(n) + 1.0)),
        f2=lambda n, t: -1j * np.sin(g * t * np.sqrt(np.asarray(n, dtype=float))),
        f3=lambda n, t: -1j * np.sin(g * t * np.sqrt(np.asarray(n) + 1.0)),
        f4=lambda n, t: np.cos(g * t * np.sqrt(np.asarray(n, dtype=float))),
    )


def jcm_env_operators(p: JCMParams, t: float) -> EvolutionDecomposition:
    """Closed-form E1..E4 of the resonant JCM on the truncated field.

    ``E1 = cos(gt sqrt(a a^dag))``, ``E2 = -i sin(gt sqrt(a a^dag)) / sqrt(a a^dag) a``,
    ``E3 = -i a^dag sin(gt sqrt(a a^dag)) / sqrt(a a^dag)``, ``E4 = cos(gt sqrt(a^dag a))``,
    with the truncated ladder operators.  On the top level a a^dag = 0, so
    ``E1|N> = |N>`` and ``E3|N> = 0`` and the assembled propagator equals
    the exact exponential of the truncated Hamiltonian.
    """
    if t < 0:
        raise InvalidArgumentError("t must be non-negative")
    N = p.n_trunc
    n = np.arange(N + 1, dtype=float)
    gt = p.g * t
    f1 = np.cos(gt * np.sqrt(n + 1.0))
    f1[N] = 1.0
    f4 = np.cos(gt * np.sqrt(n))
    E2 = np.zeros((N + 1, N + 1), dtype=complex)
    E3 = np.zeros_like(E2)
    idx = np.arange(1, N + 1)
    E2[idx - 1, idx] = -1j * np.sin(gt * np.sqrt(idx))
    E3[idx, idx - 1] = -1j * np.sin(gt * np.sqrt(idx))
    return EvolutionDecomposition(np.diag(f1).astype(complex), E2, E3, np.diag(f4).astype(complex), t=t)


@dataclass(frozen=True)
class SBMParams(EvolutionModel):
    """Simplified single-mode spin-boson model (interaction picture)."""

    omega0: float
    omega: float
    g: complex
    n_trunc: int = 64
    truncated: bool = field(default=True, init=False)

    def __post_init__(self):
        if self.omega == 0:
            raise InvalidArgumentError("mode frequency omega must be non-zero")
        if self.n_trunc < 1:
            raise InvalidArgumentError("n_trunc must be >= 1")
        tail = coherent_tail_weight(self.max_displacement, self.n_trunc)
        if tail > SBM_TAIL_TOL:
            raise TruncationError(
                f"n_trunc={self.n_trunc} leaves weight {tail:.2e} above the cutoff at "
                f"|lambda|max={self.max_displacement:g}"
            )

    @property
    def env_dim(self) -> int:
        return self.n_trunc + 1

    @property
    def max_displacement(self) -> float:
        return 2.0 * abs(self.g) / abs(self.omega)

    def lam(self, t: float) -> complex:
        return complex(self.g) / self.omega * (1.0 - np.exp(1j * self.omega * t))

    def env_initial(self) -> np.ndarray:
        return fock_state(0, self.n_trunc)

    def evolution(self, t: float) -> EvolutionDecomposition:
        return sbm_evolution(self, t)

    def coupling_operator(self) -> np.ndarray:
        a = annihilation(self.n_trunc)
        return complex(self.g) * dagger(a) + np.conj(complex(self.g)) * a

    def hamiltonian_terms(self):
        """(H_S, H_E, H') in the Schroedinger picture."""
        return (0.5 * self.omega0 * SIGMA_Z,
                self.omega * number_operator(self.n_trunc),
                np.kron(SIGMA_Z, self.coupling_operator()))


def sbm_displacement(p: SBMParams, t: float) -> np.ndarray:
    if t < 0:
        raise InvalidArgumentError("t must be non-negative")
    return displacement(p.lam(t), p.n_trunc)


def sbm_evolution(p: SBMParams, t: float) -> EvolutionDecomposition:
    """E1 = D(lam(t)), E2 = E3 = 0, E4 = D(-lam(t))."""
    D = sbm_displacement(p, t)
    zero = np.zeros_like(D)
    return EvolutionDecomposition(D, zero, zero, dagger(D), t=t)


def equal_superposition_amplitudes(N: int):
    s = 1.0 / math.sqrt(2.0)
    return [(s, s)] * N


@dataclass(frozen=True)
class SpinSpinParams(EvolutionModel):
    """Central spin coupled through sz sz terms to N environment spins.

    Environment spin basis: |0> is the +1 eigenstate of sz; amplitudes per
    spin are (alpha_i, beta_i) on (|0>, |1>), default equal superposition.
    """

    delta0: float
    couplings: tuple
    env_amplitudes: tuple | None = None
    picture: str = "schrodinger"

    def __post_init__(self):
        g = tuple(float(x) for x in self.couplings)
        if not g:
            raise InvalidArgumentError("at least one environment spin is required")
        if len(g) > MAX_SPINS:
            raise CapacityError(f"{len(g)} spins exceed the dense bound of {MAX_SPINS}")
        object.__setattr__(self, "couplings", g)
        amps = self.env_amplitudes
        if amps is None:
            amps = equal_superposition_amplitudes(len(g))
        amps = tuple((complex(a), complex(b)) for a, b in amps)
        if len(amps) != len(g):
            raise InvalidArgumentError("need one (alpha, beta) pair per environment spin")
        for a, b in amps:
            if abs(abs(a) ** 2 + abs(b) ** 2 - 1.0) > 1e-12:
                raise InvalidArgumentError("environment spin amplitudes must be normalized")
        object.__setattr__(self, "env_amplitudes", amps)

    @property
    def n_spins(self) -> int:
        return len(self.couplings)

    @property
    def env_dim(self) -> int:
        return 2 ** self.n_spins

    def env_initial(self) -> np.ndarray:
        v = np.ones(1, dtype=complex)
        for a, b in self.env_amplitudes:
            v = np.kron(v, np.array([a, b]))
        return v

    def env_coupling_diagonal(self) -> np.ndarray:
        """Diagonal of sum_i g_i sz_i in the product basis."""
        N = self.n_spins
        idx = np.arange(2 ** N)
        diag = np.zeros(2 ** N)
        for i, g in enumerate(self.couplings):
            bit = (idx >> (N - 1 - i)) & 1
            diag += g * (1 - 2 * bit)
        return diag

    def hamiltonian_terms(self):
        H_S = -0.5 * self.delta0 * SIGMA_X
        H_E = np.zeros((self.env_dim, self.env_dim), dtype=complex)
        H_prime = 0.5 * np.kron(SIGMA_Z, np.diag(self.env_coupling_diagonal()).astype(complex))
        return H_S, H_E, H_prime

    def evolution(self, t: float) -> EvolutionDecomposition:
        if self.delta0 == 0.0:
            # H is diagonal; exp(-iHt) is exact elementwise
            half = 0.5 * self.env_coupling_diagonal()
            E1 = np.diag(np.exp(-1j * half * t))
            zero = np.zeros_like(E1)
            return EvolutionDecomposition(E1, zero, zero, np.conj(E1), t=t)
        return self._dense_model().evolution(t)

    def _dense_model(self) -> HamiltonianModel:
        cached = self.__dict__.get("_dense")
        if cached is None:
            cached = HamiltonianModel(*self.hamiltonian_terms(), picture=self.picture)
            object.__setattr__(self, "_dense", cached)
        return cached


def spin_spin_hamiltonian(p: SpinSpinParams) -> np.ndarray:
    H_S, H_E, H_prime = p.hamiltonian_terms()
    return np.kron(H_S, np.eye(p.env_dim)) + H_prime


def spin_spin_decoherence_factor(p: SpinSpinParams, t) -> np.ndarray:
    """prod_i (|alpha_i|^2 e^{-i g_i t} + |beta_i|^2 e^{i g_i t}) for Delta0 = 0.

    rho_ab(t) = rho_ab(0) times this factor.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    r = np.ones(t.shape, dtype=complex)
    for g, (a, b) in zip(p.couplings, p.env_amplitudes):
        r *= abs(a) ** 2 * np.exp(-1j * g * t) + abs(b) ** 2 * np.exp(1j * g * t)
    return r


def gaussian_couplings(N: int, mean: float, sigma: float, seed: int) -> list:
    """N draws from Normal(mean, sigma^2); deterministic for a fixed seed."""
    if N < 1:
        raise InvalidArgumentError("N must be >= 1")
    if sigma < 0:
        raise InvalidArgumentError("sigma must be >= 0")
    rng = np.random.default_rng(seed)
    return [float(x) for x in rng.normal(mean, sigma, size=N)]
