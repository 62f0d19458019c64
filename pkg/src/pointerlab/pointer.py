"""Pointer states from the parallelism of the two system branches.

For a state ``A (x) |a> + B (x) |b>`` the reduced qubit state is pure exactly
when ``A = G B`` for a complex scalar ``G``.  The scan below looks for initial
amplitudes ``(alpha, beta)`` that keep the branches parallel on a whole time
grid; the trajectory helpers then read off the system state
``N (G|a> + |b>)`` and the environment state ``B / ||B||`` at every time.

Initial system states on the sphere are parameterized as
``(alpha, beta) = (cos(theta/2), exp(i chi) sin(theta/2))``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .evolution import EvolutionModel, TimeGrid, propagate
from .exceptions import (
    DegenerateBranchError,
    EmptyProfileError,
    InvalidArgumentError,
    PointerBrokenError,
)
from .hilbert import KET_A, KET_B, BipartiteState, entanglement_entropy, fidelity, norm2, tensor
from .models import JCMParams, LadderCoeffs, coherent_state

ZERO_BRANCH_NORM2 = 1e-24
EXACT_SCALAR_TOL = 1e-6
WEIGHT_FLOOR = 1e-8
DEDUP_DEGREES = 1.0


def default_scalar_tol(model=None) -> float:
    """Parallelism tolerance appropriate to ``model``.

    Models with an exact symmetry get 1e-6.  For the Jaynes-Cummings model the
    branches are only asymptotically parallel and the defect of the best
    initial state falls like 1/nbar, so the tolerance is ``5 / nbar`` (capped
    at 0.5).
    """
    if isinstance(model, JCMParams) and model.nbar > 0:
        return min(5.0 / model.nbar, 0.5)
    return EXACT_SCALAR_TOL


def amplitudes(theta: float, chi: float):
    return complex(math.cos(theta / 2)), complex(np.exp(1j * chi) * math.sin(theta / 2))


def sphere_angles(alpha: complex, beta: complex):
    """(theta, chi) of the ray through (alpha, beta); chi = 0 at the poles."""
    n = math.hypot(abs(alpha), abs(beta))
    theta = 2.0 * math.atan2(abs(beta), abs(alpha))
    if abs(alpha) / n < 1e-15 or abs(beta) / n < 1e-15:
        return theta, 0.0
    chi = float(np.angle(beta / alpha)) % (2 * math.pi)
    return theta, chi


def bloch_direction(theta: float, chi: float) -> np.ndarray:
    return np.array([math.sin(theta) * math.cos(chi), math.sin(theta) * math.sin(chi), math.cos(theta)])


def ray_angle_degrees(u, v) -> float:
    """Great-circle distance between two system rays on the Bloch sphere."""
    ru = bloch_direction(*sphere_angles(*u))
    rv = bloch_direction(*sphere_angles(*v))
    return math.degrees(math.acos(min(1.0, max(-1.0, float(ru @ rv)))))


@dataclass(frozen=True)
class GProfile:
    """Index-resolved ratios G_n(t) for a ladder-structured propagator.

    ``weights`` are the branch weights |B_n|^2 of the retained indices, which
    at t = 0 reduce to |beta c_n|^2.
    """

    t: float
    indices: np.ndarray
    ratios: np.ndarray
    weights: np.ndarray
    scalar_estimate: complex
    dispersion: float


@dataclass(frozen=True)
class PointerCandidate:
    theta: float
    chi: float
    alpha: complex
    beta: complex
    defect_max: float
    entropy_max: float
    normalization: str = "per-time: N = 1/sqrt(|G|^2 + 1), environment state renormalized separately"

    @classmethod
    def from_angles(cls, theta, chi, defect_max, entropy_max) -> "PointerCandidate":
        a, b = amplitudes(theta, chi)
        return cls(float(theta), float(chi), a, b, float(defect_max), float(entropy_max))

    @property
    def system_state(self) -> np.ndarray:
        return np.array([self.alpha, self.beta])

    @property
    def direction(self) -> np.ndarray:
        return bloch_direction(self.theta, self.chi)


@dataclass(frozen=True)
class PointerTrajectory:
    """System and environment pointer states at each grid time.

    ``G_values`` holds None where the |b> branch vanishes (pointer |a>).
    """

    times: np.ndarray
    system_states: list = field(repr=False)
    env_states: list = field(repr=False)
    G_values: list = field(repr=False)
    defects: np.ndarray = field(repr=False)
    reconstruction_fidelity: np.ndarray = field(repr=False)


def branch_vectors(state: BipartiteState):
    """(A, B) with state = A (x) |a> + B (x) |b>."""
    return state.A, state.B


def parallelism_defect(A, B) -> float:
    """1 - |<A,B>|^2 / (||A||^2 ||B||^2), or 0 when exactly one branch vanishes."""
    A = np.asarray(A, dtype=complex)
    B = np.asarray(B, dtype=complex)
    na, nb = norm2(A), norm2(B)
    if na <= ZERO_BRANCH_NORM2 and nb <= ZERO_BRANCH_NORM2:
        raise InvalidArgumentError("both branches are zero")
    if na <= ZERO_BRANCH_NORM2 or nb <= ZERO_BRANCH_NORM2:
        return 0.0
    d = 1.0 - abs(np.vdot(A, B)) ** 2 / (na * nb)
    return float(min(max(d, 0.0), 1.0))


def g_scalar(A, B, tol: float = EXACT_SCALAR_TOL):
    """The scalar G with A = G B, or None when the branches are not parallel.

    Raises
    ------
    DegenerateBranchError
        ``B`` vanishes but ``A`` does not; the pointer is the bare |a>.
    """
    A = np.asarray(A, dtype=complex)
    B = np.asarray(B, dtype=complex)
    nb = norm2(B)
    if nb <= 1e-24:
        if norm2(A) > 1e-24:
            raise DegenerateBranchError("|b> branch vanishes; pointer state is |a>")
        raise InvalidArgumentError("both branches are zero")
    if parallelism_defect(A, B) > tol:
        return None
    return complex(np.vdot(B, A) / nb)


def g_profile_ladder(coeffs: LadderCoeffs, env_coeffs, alpha: complex, beta: complex,
                     t: float, weight_floor: float = WEIGHT_FLOOR) -> GProfile:
    """Per-index ratios of the A and B components for a ladder propagator.

    For every n > 0,
    ``G_n = (alpha c_n f1(n) + beta c_{n+1} f2(n+1)) / (alpha c_{n-1} f3(n-1) + beta c_n f4(n))``.
    An index is kept when ``|c_n|^2`` and the squared denominator both reach
    ``weight_floor`` times their largest value.  The dispersion is the
    weighted standard deviation of the kept ratios over ``|mean|``.
    """
    c = np.asarray(env_coeffs, dtype=complex)
    if c.ndim != 1 or c.size < 2:
        raise InvalidArgumentError("need at least two environment coefficients")
    N = c.size - 1
    n = np.arange(1, N + 1)
    c_next = np.append(c[2:], 0.0)
    num = alpha * c[n] * coeffs.f1(n, t) + beta * c_next * coeffs.f2(n + 1, t)
    den = alpha * c[n - 1] * coeffs.f3(n - 1, t) + beta * c[n] * coeffs.f4(n, t)
    pop = np.abs(c[n]) ** 2
    w_den = np.abs(den) ** 2
    if w_den.max(initial=0.0) == 0.0:
        raise EmptyProfileError("every denominator vanishes", time=t)
    keep = (pop >= weight_floor * np.max(np.abs(c) ** 2)) & (w_den >= weight_floor * w_den.max())
    if not np.any(keep):
        raise EmptyProfileError("no index survives the weight floor", time=t)
    ratios = num[keep] / den[keep]
    w = w_den[keep]
    mean = complex(np.sum(w * ratios) / np.sum(w))
    spread = math.sqrt(float(np.sum(w * np.abs(ratios - mean) ** 2) / np.sum(w)))
    if spread == 0.0:
        dispersion = 0.0
    elif mean == 0:
        dispersion = math.inf
    else:
        dispersion = spread / abs(mean)
    return GProfile(float(t), n[keep], ratios, w, mean, dispersion)


# ---------------------------------------------------------------- the scan


@dataclass(frozen=True)
class _BranchGrams:
    """2 x 2 Gram matrices of the evolved basis branches at each time.

    With X = [A_a, A_b] and Y = [B_a, B_b] (columns are the A and B branches
    grown from |a> and |b>), a state v = (alpha, beta) has A = X v and
    B = Y v, so every overlap reduces to v^dag G v.
    """

    XX: np.ndarray
    YY: np.ndarray
    YX: np.ndarray

    @classmethod
    def build(cls, model: EvolutionModel, env_initial, times, evolutions=None) -> "_BranchGrams":
        env = np.asarray(env_initial, dtype=complex)
        if evolutions is None:
            evolutions = model.evolutions(times)
        sa = propagate(tensor(KET_A, env), model, times, evolutions)
        sb = propagate(tensor(KET_B, env), model, times, evolutions)
        X = np.stack([np.stack([s.A, r.A], axis=1) for s, r in zip(sa, sb)])
        Y = np.stack([np.stack([s.B, r.B], axis=1) for s, r in zip(sa, sb)])
        Xh = np.conj(np.swapaxes(X, 1, 2))
        Yh = np.conj(np.swapaxes(Y, 1, 2))
        return cls(Xh @ X, Yh @ Y, Yh @ X)

    def profiles(self, V: np.ndarray):
        """Defect and entropy, shape (times, states), for state rows of ``V``."""
        Vc = np.conj(V)
        na = np.einsum("ki,tij,kj->tk", Vc, self.XX, V).real
        nb = np.einsum("ki,tij,kj->tk", Vc, self.YY, V).real
        ov = np.einsum("ki,tij,kj->tk", Vc, self.YX, V)
        both = (na > ZERO_BRANCH_NORM2) & (nb > ZERO_BRANCH_NORM2)
        safe = np.where(both, na * nb, 1.0)
        defect = np.where(both, 1.0 - np.abs(ov) ** 2 / safe, 0.0)
        defect = np.clip(defect, 0.0, 1.0)
        det = np.clip(na * nb - np.abs(ov) ** 2, 0.0, 0.25)
        disc = np.sqrt(np.clip(1.0 - 4.0 * det, 0.0, 1.0))
        p = np.stack([(1 + disc) / 2, (1 - disc) / 2])
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(p >= 1e-15, -p * np.log(np.where(p > 0, p, 1.0)), 0.0)
        entropy = np.clip(terms.sum(axis=0), 0.0, math.log(2.0))
        return defect, entropy


def _grid_cells(resolution: int):
    thetas = np.linspace(0.0, math.pi, resolution)
    chis = 2 * math.pi * np.arange(resolution) / resolution
    cells = [(0.0, 0.0)]
    for th in thetas[1:-1]:
        cells.extend((float(th), float(ch)) for ch in chis)
    cells.append((math.pi, 0.0))
    return cells


def _fold(theta: float, chi: float):
    theta = theta % (2 * math.pi)
    if theta > math.pi:
        theta, chi = 2 * math.pi - theta, chi + math.pi
    if theta < 1e-12 or math.pi - theta < 1e-12:
        chi = 0.0
    return theta, chi % (2 * math.pi)


def _rank_key(c: PointerCandidate):
    return (c.defect_max, c.entropy_max, c.theta, c.chi)


def _chunks(n: int, parts: int):
    step = max(1, math.ceil(n / parts))
    return [(i, min(n, i + step)) for i in range(0, n, step)]


def scan_pointer_candidates(model: EvolutionModel, env_initial, grid: TimeGrid,
                            resolution: int = 32, *, n_seeds: int = 6, refine: bool = True,
                            threads: int = 1, evolutions=None) -> list:
    """Rank initial system states by how well they stay unentangled.

    Every cell of a ``resolution`` x ``resolution`` (theta, chi) grid is
    scored by its maximum parallelism defect over ``grid``.  The best cells
    that are at least two grid spacings apart seed a Nelder-Mead refinement.
    Refined candidates closer than 1 degree on the Bloch sphere are merged.

    The ranking key is (defect_max, entropy_max, theta, chi), which is total,
    so the output does not depend on ``threads``.
    """
    if resolution < 8:
        raise InvalidArgumentError("resolution must be >= 8")
    if threads < 1:
        raise InvalidArgumentError("threads must be >= 1")
    times = grid.points if isinstance(grid, TimeGrid) else np.asarray(grid, dtype=float)
    grams = _BranchGrams.build(model, env_initial, times, evolutions)

    cells = _grid_cells(resolution)
    V = np.array([amplitudes(th, ch) for th, ch in cells])

    def score(lo, hi):
        d, s = grams.profiles(V[lo:hi])
        return d.max(axis=0), s.max(axis=0)

    parts = _chunks(len(cells), threads)
    if threads == 1:
        scored = [score(lo, hi) for lo, hi in parts]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            scored = list(pool.map(lambda r: score(*r), parts))
    dmax = np.concatenate([d for d, _ in scored])
    smax = np.concatenate([s for _, s in scored])
    ranked = sorted(
        (PointerCandidate.from_angles(th, ch, dmax[i], smax[i]) for i, (th, ch) in enumerate(cells)),
        key=_rank_key,
    )

    spacing = math.pi / (resolution - 1)
    seeds = []
    for c in ranked:
        if len(seeds) == n_seeds:
            break
        if all(_sphere_distance(c, s) >= 2 * spacing for s in seeds):
            seeds.append(c)

    if refine:
        def polish(seed):
            return _refine(grams, seed, spacing)

        if threads == 1:
            refined = [polish(s) for s in seeds]
        else:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                refined = list(pool.map(polish, seeds))
    else:
        refined = list(seeds)

    out = []
    for c in sorted(refined, key=_rank_key):
        if all(math.degrees(_sphere_distance(c, k)) >= DEDUP_DEGREES for k in out):
            out.append(c)
    return out


def _sphere_distance(c1: PointerCandidate, c2: PointerCandidate) -> float:
    return math.acos(min(1.0, max(-1.0, float(c1.direction @ c2.direction))))


def _refine(grams: _BranchGrams, seed: PointerCandidate, spacing: float) -> PointerCandidate:
    def objective(x):
        v = np.array([amplitudes(x[0], x[1])])
        d, _ = grams.profiles(v)
        return float(d.max())

    x0 = np.array([seed.theta, seed.chi])
    simplex = np.array([x0, x0 + [spacing, 0.0], x0 + [0.0, spacing]])
    res = minimize(objective, x0, method="Nelder-Mead",
                   options={"initial_simplex": simplex, "xatol": 1e-7, "fatol": 1e-15,
                            "maxiter": 2000})
    best = res.x if res.fun <= seed.defect_max else x0
    theta, chi = _fold(float(best[0]), float(best[1]))
    d, s = grams.profiles(np.array([amplitudes(theta, chi)]))
    return PointerCandidate.from_angles(theta, chi, d.max(), s.max())


def defect_profile(model: EvolutionModel, env_initial, grid: TimeGrid, alpha: complex,
                   beta: complex, evolutions=None):
    """Parallelism defect and entanglement entropy at each grid time."""
    states = propagate(tensor(np.array([alpha, beta]), np.asarray(env_initial, dtype=complex)),
                       model, grid, evolutions)
    defect = np.array([parallelism_defect(s.A, s.B) for s in states])
    entropy = np.array([entanglement_entropy(s) for s in states])
    return defect, entropy


def pointer_trajectory(candidate: PointerCandidate, model: EvolutionModel, env_initial,
                       grid: TimeGrid, tol: float | None = None,
                       evolutions=None) -> PointerTrajectory:
    """System state N(G|a> + |b>) and environment state B/||B|| on ``grid``.

    Raises
    ------
    PointerBrokenError
        The defect exceeds ``tol`` (default :func:`default_scalar_tol`) at
        some grid time; the error carries that time.
    """
    tol = default_scalar_tol(model) if tol is None else tol
    times = grid.points if isinstance(grid, TimeGrid) else np.asarray(grid, dtype=float)
    env0 = np.asarray(env_initial, dtype=complex)
    states = propagate(tensor(candidate.system_state, env0), model, times, evolutions)
    sys_states, env_states, gs, defects, recon = [], [], [], [], []
    for t, s in zip(times, states):
        A, B = branch_vectors(s)
        d = parallelism_defect(A, B)
        if d > tol:
            raise PointerBrokenError(f"branch defect {d:.3e} exceeds {tol:.3e} at t={t:g}", time=float(t))
        if norm2(B) <= ZERO_BRANCH_NORM2:
            G = None
            sys_state = KET_A.copy()
            env = A / math.sqrt(norm2(A))
        else:
            G = complex(np.vdot(B, A) / norm2(B))
            sys_state = np.array([G, 1.0]) / math.sqrt(abs(G) ** 2 + 1.0)
            env = B / math.sqrt(norm2(B))
        product = np.concatenate([sys_state[0] * env, sys_state[1] * env])
        sys_states.append(sys_state)
        env_states.append(env)
        gs.append(G)
        defects.append(d)
        recon.append(fidelity(product, s.vector))
    return PointerTrajectory(np.asarray(times), sys_states, env_states, gs,
                             np.array(defects), np.array(recon))


def analytic_jcm_pointers(p: JCMParams, t: float, min_nbar: float = 25.0):
    """Large-nbar pointer states of the resonant JCM with a coherent field.

    Returns ``((plus, minus), (env_plus, env_minus))`` where
    ``plus/minus = (e^{-i phi} e^{-/+ i g t / (2 sqrt(nbar))} |a> +/- |b>)/sqrt(2)``
    and the field states are ``sum_n c_n e^{-/+ i g t sqrt(n)} |n>``, normalized
    on the truncated space.
    """
    if p.nbar < min_nbar:
        raise InvalidArgumentError(f"analytic pointers need nbar >= {min_nbar}, got {p.nbar}")
    shift = p.g * t / (2.0 * math.sqrt(p.nbar))
    ph = np.exp(-1j * p.phi)
    s = 1.0 / math.sqrt(2.0)
    plus = s * np.array([ph * np.exp(-1j * shift), 1.0])
    minus = s * np.array([ph * np.exp(1j * shift), -1.0])
    c = coherent_state(p.nu, p.n_trunc)
    root_n = np.sqrt(np.arange(p.n_trunc + 1))
    env_plus = c * np.exp(-1j * p.g * t * root_n)
    env_minus = c * np.exp(1j * p.g * t * root_n)
    return (plus, minus), (env_plus / np.linalg.norm(env_plus), env_minus / np.linalg.norm(env_minus))
