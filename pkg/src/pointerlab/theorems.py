"""Structural tests that predict time-independent pointer states.

Four sufficient conditions are checked, all on the blocks of the joint
propagator ``U = [[E1, E2], [E3, E4]]`` or of the interaction-picture
Hamiltonian ``H_int = [[h11, h12], [h21, h22]]`` in a chosen system basis:

1. ``E2 = E3 = 0``: the basis states themselves are stationary pointers.
2. ``E1 = E4`` and ``E2 = exp(-i phi) E3``: the pointers are
   ``(|a> +/- exp(i phi/2)|b>)/sqrt(2)``.
3. ``[H_S (x) I, H'] = 0``: the eigenstates of ``H_S`` are pointers, or,
   when ``H_S`` is zero or proportional to the identity, the system
   eigenbasis of ``H'``.
4. ``h11 = h22`` and ``h12 = exp(-i phi) h21``: ``E1 = E4`` and
   ``E2 = exp(-i phi) E3`` follow, so the prediction is that of test 2.

A prediction made in the interaction picture is a preferred basis of the
full dynamics only if ``H_S`` is negligible or diagonal in that basis; every
report carries that flag as ``schrodinger_caveat``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .evolution import _basis_matrix, decompose, interaction_picture
from .exceptions import InvalidArgumentError
from .hilbert import (
    KET_A,
    KET_B,
    as_operator,
    commutator,
    dagger,
    is_hermitian,
    op_norm,
    random_hermitian,
)
from .pointer import PointerCandidate, ray_angle_degrees

DEFAULT_TOL = 1e-8
GAP_TOL = 1e-10
_HALF = 1.0 / math.sqrt(2.0)


@dataclass(frozen=True)
class TheoremReport:
    theorem_id: str
    holds: bool
    residuals: dict
    tolerance: float
    fitted_phase: float | None = None
    predicted_basis: tuple | None = field(default=None, repr=False)
    schrodinger_caveat: bool = False
    notes: str = ""

    def __post_init__(self):
        if self.holds != (self.predicted_basis is not None):
            raise InvalidArgumentError("a report carries a basis exactly when the condition holds")

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values(), default=0.0)


@dataclass(frozen=True)
class SystemBlockHamiltonian:
    """H_S = s1 |a><a| + s2 |a><b| + s3 |b><a| + s4 |b><b|."""

    s1: complex
    s2: complex
    s3: complex
    s4: complex

    def __post_init__(self):
        if abs(complex(self.s1).imag) > 1e-12 or abs(complex(self.s4).imag) > 1e-12 \
                or abs(complex(self.s2) - np.conj(complex(self.s3))) > 1e-12:
            raise InvalidArgumentError("system Hamiltonian entries are not Hermitian")

    @classmethod
    def from_operator(cls, H_S, system_basis=None) -> "SystemBlockHamiltonian":
        H_S = as_operator(H_S, dim=2)
        W = _basis_matrix((KET_A, KET_B) if system_basis is None else system_basis)
        M = dagger(W) @ H_S @ W
        return cls(M[0, 0], M[0, 1], M[1, 0], M[1, 1])

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.s1, self.s2], [self.s3, self.s4]], dtype=complex)


@dataclass(frozen=True)
class InteractionBlocks:
    """System-basis blocks of H_int at one time."""

    h11: np.ndarray
    h12: np.ndarray
    h21: np.ndarray
    h22: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        h11 = as_operator(self.h11)
        d = h11.shape[0]
        h12, h21, h22 = (as_operator(getattr(self, k), dim=d) for k in ("h12", "h21", "h22"))
        scale = max(1.0, float(np.max(np.abs(h11))), float(np.max(np.abs(h12))),
                    float(np.max(np.abs(h22))))
        if not (is_hermitian(h11, 1e-12 * scale) and is_hermitian(h22, 1e-12 * scale)):
            raise InvalidArgumentError("diagonal interaction blocks must be Hermitian")
        if np.max(np.abs(h21 - dagger(h12))) > 1e-12 * scale:
            raise InvalidArgumentError("h21 must be the adjoint of h12")
        for k, m in zip(("h11", "h12", "h21", "h22"), (h11, h12, h21, h22)):
            object.__setattr__(self, k, m)

    @cached_property
    def scale(self) -> float:
        return max(1.0, op_norm(self.h11), op_norm(self.h12), op_norm(self.h22))


def interaction_blocks(H_int, system_basis=None, t: float = 0.0) -> InteractionBlocks:
    H_int = as_operator(H_int)
    if H_int.shape[0] % 2:
        raise InvalidArgumentError("interaction Hamiltonian dimension must be even")
    d = H_int.shape[0] // 2
    M = H_int
    if system_basis is not None:
        W = np.kron(_basis_matrix(system_basis), np.eye(d))
        M = dagger(W) @ H_int @ W
    return InteractionBlocks(M[:d, :d], M[:d, d:], M[d:, :d], M[d:, d:], t=t)


def interaction_blocks_series(H_S, H_E, H_prime, times, system_basis=None) -> list:
    """Blocks of exp(i H0 t) H' exp(-i H0 t) at every time."""
    return [interaction_blocks(interaction_picture(H_S, H_E, H_prime, float(t)), system_basis, float(t))
            for t in times]


def _caveat(basis, H_S) -> bool:
    """True unless H_S is negligible or diagonal in ``basis``.

    Without an ``H_S`` the caveat is raised, since nothing rules it out.
    """
    if basis is None:
        return False
    if H_S is None:
        return True
    H_S = as_operator(H_S, dim=2)
    scale = op_norm(H_S)
    if scale <= GAP_TOL:
        return False
    W = np.column_stack(basis)
    M = dagger(W) @ H_S @ W
    return bool(abs(M[0, 1]) > 1e-8 * scale)


def _ket_basis(decomps):
    return tuple(np.array(v) for v in decomps[0].basis)


def _superposition_basis(basis, phase: float):
    """(|a> +/- exp(i phase)|b>)/sqrt(2) in computational coordinates."""
    a, b = basis
    e = np.exp(1j * phase)
    return (_HALF * (a + e * b), _HALF * (a - e * b))


def _require_series(decomps):
    decomps = list(decomps)
    if len(decomps) < 2:
        raise InvalidArgumentError("theorem checks need at least 2 time points")
    return decomps


def check_theorem1(decomps, tol: float = DEFAULT_TOL, H_S=None) -> TheoremReport:
    """Vanishing off-diagonal blocks E2, E3 on every sampled time."""
    decomps = _require_series(decomps)
    r2 = max(op_norm(d.E2) for d in decomps)
    r3 = max(op_norm(d.E3) for d in decomps)
    holds = max(r2, r3) <= tol
    basis = _ket_basis(decomps) if holds else None
    return TheoremReport("1", holds, {"E2": r2, "E3": r3}, tol, None, basis, _caveat(basis, H_S))


def _fit_phase(num_pairs) -> float | None:
    """phi minimizing sum ||X - exp(-i phi) Y||^2 over (X, Y) pairs."""
    s = sum(np.trace(dagger(Y) @ X) for X, Y in num_pairs)
    if abs(s) <= 1e-300:
        return None
    return float(-np.angle(s))


def check_theorem2(decomps, tol: float = DEFAULT_TOL, H_S=None) -> TheoremReport:
    """E1 = E4 and E2 = exp(-i phi) E3, with phi fitted from the trace overlap."""
    decomps = _require_series(decomps)
    r14 = max(op_norm(d.E1 - d.E4) for d in decomps)
    off = max(max(op_norm(d.E2), op_norm(d.E3)) for d in decomps)
    if off <= tol:
        return TheoremReport("2", False, {"E1-E4": r14, "E2,E3": off}, tol,
                             notes="E2 and E3 vanish, phase undetermined; see theorem 1")
    phi = _fit_phase((d.E2, d.E3) for d in decomps)
    if phi is None:
        phi = 0.0
    rot = np.exp(-1j * phi)
    r23 = max(op_norm(d.E2 - rot * d.E3) for d in decomps)
    holds = max(r14, r23) <= tol
    basis = _superposition_basis(_ket_basis(decomps), phi / 2) if holds else None
    return TheoremReport("2", holds, {"E1-E4": r14, "E2-exp(-i phi)E3": r23}, tol, phi, basis,
                         _caveat(basis, H_S))


def _system_factor_basis(H_prime):
    """System eigenbasis shared by every term of H' = sum_k S_k (x) X_k.

    H' is reshaped so that its operator-Schmidt (SVD) decomposition gives
    the system factors S_k.  A common eigenbasis that is not arbitrary exists
    when the traceless parts of the S_k span a single direction.  Returns
    (basis or None, explanation).
    """
    H_prime = as_operator(H_prime)
    d = H_prime.shape[0] // 2
    # H'[i*d + m, j*d + n] -> R[(i, j), (m, n)]
    R = H_prime.reshape(2, d, 2, d).transpose(0, 2, 1, 3).reshape(4, d * d)
    u, s, _ = np.linalg.svd(R, full_matrices=False)
    keep = s > 1e-12 * max(s[0], 1e-300)
    factors = [u[:, k].reshape(2, 2) * s[k] for k in np.flatnonzero(keep)]
    traceless = [S - 0.5 * np.trace(S) * np.eye(2) for S in factors]
    vecs = np.array([[T[0, 0], T[0, 1], T[1, 0]] for T in traceless])
    if vecs.size == 0 or np.max(np.abs(vecs)) <= 1e-12 * max(1.0, op_norm(H_prime)):
        return None, "H' acts trivially on the system; every state is stationary, so no basis is singled out"
    sv = np.linalg.svd(vecs, compute_uv=False)
    if sv.size > 1 and sv[1] > 1e-10 * sv[0]:
        return None, "H' is not of the form S (x) E_1 + I (x) E_2 in any system basis"
    T = traceless[int(np.argmax([op_norm(T) for T in traceless]))]
    # T = c P with P Hermitian and traceless, so tr(T T) = c^2 tr(P^2) fixes arg c
    P = T * np.exp(-0.5j * np.angle(np.trace(T @ T)))
    _, v = np.linalg.eigh(0.5 * (P + dagger(P)))
    return (v[:, 1].copy(), v[:, 0].copy()), ""


def check_theorem3(H_S, H_prime, tol: float = DEFAULT_TOL) -> TheoremReport:
    """Commutation of H_S (x) I with H', relative to ||H_S|| ||H'||."""
    H_S = as_operator(H_S, dim=2)
    H_prime = as_operator(H_prime)
    if H_prime.shape[0] % 2:
        raise InvalidArgumentError("H' dimension must be even")
    d = H_prime.shape[0] // 2
    c = op_norm(commutator(np.kron(H_S, np.eye(d)), H_prime))
    ns, nh = op_norm(H_S), op_norm(H_prime)
    rel = c / (ns * nh) if ns * nh > 0 else 0.0
    residuals = {"[H_S,H']": rel}
    if rel > tol:
        return TheoremReport("3", False, residuals, tol)
    w, v = np.linalg.eigh(H_S)
    if w[1] - w[0] > GAP_TOL * ns and ns > 0:
        basis = (v[:, 0].copy(), v[:, 1].copy())
        return TheoremReport("3", True, residuals, tol, None, basis, False,
                             notes="eigenstates of H_S")
    basis, why = _system_factor_basis(H_prime)
    if basis is None:
        return TheoremReport("3", False, residuals, tol, notes=why)
    return TheoremReport("3", True, residuals, tol, None, basis, False,
                         notes="H_S is zero or proportional to I; system eigenstates of H'")


def check_theorem4(blocks, tol: float = DEFAULT_TOL, H_S=None) -> TheoremReport:
    """h11 = h22 and h12 = exp(-i phi) h21 on every sampled time.

    Residuals are compared with ``tol`` times the largest block norm (at
    least 1).  The predicted basis is ``(|a> +/- exp(i phi/2)|b>)/sqrt(2)``:
    with h21 = h12^dag the condition forces ``h12 = exp(-i phi/2) K`` for a
    Hermitian K, and those are the eigenvectors of the system factor
    ``[[0, exp(-i phi/2)], [exp(i phi/2), 0]]``.  The form
    ``(|a> +/- exp(-i phi)|b>)/sqrt(2)`` is kept in the notes for reference.
    """
    blocks = list(blocks)
    if len(blocks) < 2:
        raise InvalidArgumentError("theorem checks need at least 2 time points")
    for b in blocks:
        if not isinstance(b, InteractionBlocks):
            raise InvalidArgumentError("check_theorem4 expects InteractionBlocks")
    scale = max(b.scale for b in blocks)
    r_diag = max(op_norm(b.h11 - b.h22) for b in blocks)
    phi = _fit_phase((b.h12, b.h21) for b in blocks)
    if phi is None:
        phi = 0.0
    rot = np.exp(-1j * phi)
    r_off = max(op_norm(b.h12 - rot * b.h21) for b in blocks)
    holds = max(r_diag, r_off) <= tol * scale
    basis = _superposition_basis((KET_A, KET_B), phi / 2) if holds else None
    notes = ("alternative stated form (|a> +/- exp(-i phi)|b>)/sqrt(2); "
             "basis given here uses exp(+i phi/2)")
    return TheoremReport("4" if abs(phi) <= 1e-12 else "4g", holds,
                         {"h11-h22": r_diag, "h12-exp(-i phi)h21": r_off}, tol, phi, basis,
                         _caveat(basis, H_S), notes)


def commutation_block_residuals(decomps, hs: SystemBlockHamiltonian) -> dict:
    """Max residuals of the three block relations implied by [U, H_S] = 0.

    ``s3 (E4 - E1) + (s1 - s4) E3``, ``s2 (E1 - E4) - (s1 - s4) E2`` and
    ``s3 E2 - s2 E3``.
    """
    out = {"r1": 0.0, "r2": 0.0, "r3": 0.0}
    ds = hs.s1 - hs.s4
    for d in decomps:
        out["r1"] = max(out["r1"], op_norm(hs.s3 * (d.E4 - d.E1) + ds * d.E3))
        out["r2"] = max(out["r2"], op_norm(hs.s2 * (d.E1 - d.E4) - ds * d.E2))
        out["r3"] = max(out["r3"], op_norm(hs.s3 * d.E2 - hs.s2 * d.E3))
    return out


def pointer_observable_commutator(basis, H_int) -> float:
    """||[O (x) I, H_int]|| for O = |p0><p0| - |p1><p1|."""
    p0, p1 = (np.asarray(v, dtype=complex) for v in basis)
    O = np.outer(p0, p0.conj()) - np.outer(p1, p1.conj())
    H_int = as_operator(H_int)
    return op_norm(commutator(np.kron(O, np.eye(H_int.shape[0] // 2)), H_int))


@dataclass(frozen=True)
class CrossValidation:
    verdict: str
    angle_errors: tuple
    angle_tol: float


def cross_validate(report: TheoremReport, scan, angle_tol: float = 2.0) -> CrossValidation:
    """Compare a predicted basis with the two best rays of a pointer scan.

    The verdict is ``"agree"``, ``"disagree"`` or ``"no-prediction"``.
    Angular errors are great-circle distances in degrees on the Bloch
    sphere, under the better pairing of predicted and scanned rays.
    """
    scan = list(scan)
    if not scan:
        raise InvalidArgumentError("scan must contain at least one candidate")
    if report.predicted_basis is None:
        return CrossValidation("no-prediction", (), angle_tol)
    top = scan[:2] if len(scan) >= 2 else scan * 2
    rays = [(c.alpha, c.beta) if isinstance(c, PointerCandidate) else tuple(c) for c in top]
    p = [tuple(np.asarray(v, dtype=complex)) for v in report.predicted_basis]
    straight = (ray_angle_degrees(p[0], rays[0]), ray_angle_degrees(p[1], rays[1]))
    crossed = (ray_angle_degrees(p[0], rays[1]), ray_angle_degrees(p[1], rays[0]))
    errors = min(straight, crossed, key=max)
    verdict = "agree" if max(errors) <= angle_tol else "disagree"
    return CrossValidation(verdict, errors, angle_tol)


def theorem4_synthetic(env_dim: int, phi: float, rng, scale: float = 1.0):
    """A coupling I (x) X + M_phi (x) Y that meets the theorem 4 condition.

    X and Y are random Hermitian environment operators and
    ``M_phi = [[0, exp(-i phi/2)], [exp(i phi/2), 0]]``, so that
    ``h11 = h22 = X`` and ``h12 = exp(-i phi) h21``.
    Returns the full Hamiltonian on the 2 * env_dim space.
    """
    X = random_hermitian(env_dim, rng, scale)
    Y = random_hermitian(env_dim, rng, scale)
    M = np.array([[0, np.exp(-0.5j * phi)], [np.exp(0.5j * phi), 0]])
    return np.kron(np.eye(2), X) + np.kron(M, Y)


def decompose_series(propagators, times, system_basis=None) -> list:
    return [decompose(U, system_basis, float(t)) for U, t in zip(propagators, times)]


def run_all(decomps, H_S, H_prime, blocks=None, tol: float = DEFAULT_TOL) -> list:
    """Every applicable check, in order 1, 2, 3, 4."""
    reports = [check_theorem1(decomps, tol, H_S), check_theorem2(decomps, tol, H_S),
               check_theorem3(H_S, H_prime, tol)]
    if blocks is not None:
        reports.append(check_theorem4(blocks, tol, H_S))
    return reports


