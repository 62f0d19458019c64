import math

import numpy as np
import pytest
from hypothesis import given, seed
from hypothesis import strategies as st
from scipy.linalg import expm

from pointerlab.evolution import EvolutionDecomposition, HamiltonianModel, TimeGrid, interaction_picture
from pointerlab.exceptions import InvalidArgumentError
from pointerlab.hilbert import (
    KET_A,
    KET_B,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    random_hermitian,
)
from pointerlab.models import JCMParams, SBMParams
from pointerlab.pointer import PointerCandidate, ray_angle_degrees, scan_pointer_candidates
from pointerlab.theorems import (
    InteractionBlocks,
    SystemBlockHamiltonian,
    TheoremReport,
    check_theorem1,
    check_theorem2,
    check_theorem3,
    check_theorem4,
    commutation_block_residuals,
    cross_validate,
    decompose_series,
    interaction_blocks,
    interaction_blocks_series,
    pointer_observable_commutator,
    run_all,
    theorem4_synthetic,
)

CHAIN_TOL = 1e-8
PHASE_TOL = 1e-6
TIMES = np.linspace(0.0, 3.0, 12)


def _rays_match(basis, expected, tol_deg=1e-6):
    straight = max(ray_angle_degrees(basis[0], expected[0]), ray_angle_degrees(basis[1], expected[1]))
    crossed = max(ray_angle_degrees(basis[0], expected[1]), ray_angle_degrees(basis[1], expected[0]))
    return min(straight, crossed) <= tol_deg


def _constant_decomps(H, times=TIMES):
    return decompose_series([expm(-1j * t * H) for t in times], times)


def _sx_basis():
    return ((KET_A + KET_B) / math.sqrt(2), (KET_A - KET_B) / math.sqrt(2))


def _sbm_decomps(p, times=TIMES):
    return [p.evolution(t) for t in times]


def test_report_basis_iff_holds():
    with pytest.raises(InvalidArgumentError):
        TheoremReport("1", True, {}, 1e-8)
    with pytest.raises(InvalidArgumentError):
        TheoremReport("1", False, {}, 1e-8, predicted_basis=(KET_A, KET_B))


def test_theorem1_sbm_identity_and_jcm():
    p = SBMParams(1.0, 1.0, 1.0)
    rep = check_theorem1(_sbm_decomps(p), H_S=p.hamiltonian_terms()[0])
    assert rep.holds and rep.max_residual == 0.0
    assert _rays_match(rep.predicted_basis, (KET_A, KET_B))
    assert not rep.schrodinger_caveat
    ident = [EvolutionDecomposition.identity(3, t=t) for t in (0.0, 1.0)]
    assert check_theorem1(ident).holds
    j = JCMParams(nbar=100)
    rep = check_theorem1([j.evolution(t) for t in np.linspace(0.0, 5.0, 6)])
    assert not rep.holds and rep.max_residual > 0.5


def test_theorem1_needs_two_times():
    with pytest.raises(InvalidArgumentError):
        check_theorem1([EvolutionDecomposition.identity(2)])


def test_theorem2_sigma_x_coupling(rng):
    X = random_hermitian(4, rng)
    H_E = random_hermitian(4, rng)
    H = np.kron(0.7 * SIGMA_X, np.eye(4)) + np.kron(SIGMA_X, X) + np.kron(np.eye(2), H_E)
    rep = check_theorem2(_constant_decomps(H), H_S=0.7 * SIGMA_X)
    assert rep.holds
    assert rep.fitted_phase == pytest.approx(0.0, abs=1e-9)
    assert _rays_match(rep.predicted_basis, _sx_basis())
    assert not rep.schrodinger_caveat


def test_theorem2_refers_sbm_to_theorem1():
    rep = check_theorem2(_sbm_decomps(SBMParams(1.0, 1.0, 1.0)))
    assert not rep.holds
    assert "theorem 1" in rep.notes


def test_theorem2_fails_for_jcm():
    j = JCMParams(nbar=100)
    assert not check_theorem2([j.evolution(t) for t in np.linspace(0.0, 5.0, 6)]).holds


def test_theorem3_cases(rng):
    p = SBMParams(1.0, 1.0, 1.0)
    H_S, _, H_p = p.hamiltonian_terms()
    rep = check_theorem3(H_S, H_p)
    assert rep.holds and rep.max_residual <= 1e-10
    assert _rays_match(rep.predicted_basis, (KET_A, KET_B))

    X = random_hermitian(3, rng)
    rep = check_theorem3(np.zeros((2, 2)), np.kron(SIGMA_X, X))
    assert rep.holds and _rays_match(rep.predicted_basis, _sx_basis())
    # proportional to the identity behaves like zero
    rep = check_theorem3(2.0 * np.eye(2), np.kron(SIGMA_X, X) + np.kron(np.eye(2), X @ X))
    assert rep.holds and _rays_match(rep.predicted_basis, _sx_basis())
    # two non-commuting system factors leave no common basis
    rep = check_theorem3(np.zeros((2, 2)), np.kron(SIGMA_X, X) + np.kron(SIGMA_Z, X @ X))
    assert not rep.holds and rep.notes

    j = JCMParams(nbar=4, n_trunc=30)
    H_S, _, H_p = j.hamiltonian_terms()
    assert not check_theorem3(H_S, H_p).holds


def test_theorem3_complex_system_factor(rng):
    # a c-number phase on S must not confuse the basis extraction
    X = random_hermitian(3, rng)
    H_p = np.kron(SIGMA_Y, X)
    rep = check_theorem3(np.zeros((2, 2)), H_p)
    yb = ((KET_A + 1j * KET_B) / math.sqrt(2), (KET_A - 1j * KET_B) / math.sqrt(2))
    assert rep.holds and _rays_match(rep.predicted_basis, yb)


@pytest.mark.parametrize("phi", [0.0, math.pi / 3, -2.0])
def test_theorem4_synthetic_phase_recovered(phi):
    rng = np.random.default_rng(3)
    H = theorem4_synthetic(4, phi, rng)
    blocks = [interaction_blocks(H, t=t) for t in TIMES]
    rep = check_theorem4(blocks)
    assert rep.holds
    expected = (phi + math.pi) % (2 * math.pi) - math.pi
    assert rep.fitted_phase == pytest.approx(expected, abs=1e-9)
    assert rep.theorem_id == ("4" if phi == 0.0 else "4g")


def test_theorem4_fails_with_detuning():
    j = JCMParams(nbar=4, n_trunc=30)
    H_S, H_E, H_p = j.hamiltonian_terms()
    H_int = H_p + np.kron(0.3 * SIGMA_Z, np.eye(j.env_dim))
    assert not check_theorem4([interaction_blocks(H_int, t=t) for t in (0.0, 1.0)]).holds
    blocks = interaction_blocks_series(H_S, H_E, H_p, np.linspace(0.0, 2.0, 5))
    assert not check_theorem4(blocks).holds


def test_interaction_blocks_validation(rng):
    X = random_hermitian(2, rng)
    with pytest.raises(InvalidArgumentError):
        InteractionBlocks(X, X, X + 1j, X)
    with pytest.raises(InvalidArgumentError):
        check_theorem4([np.eye(4), np.eye(4)])
    with pytest.raises(InvalidArgumentError):
        SystemBlockHamiltonian(1.0, 1j, 1j, 0.0)


def test_theorem4_implies_theorem2_on_random_constructions():
    for k in range(20):
        rng = np.random.default_rng(100 + k)
        phi = float(rng.uniform(-math.pi, math.pi))
        H = theorem4_synthetic(int(rng.integers(2, 6)), phi, rng)
        r4 = check_theorem4([interaction_blocks(H, t=t) for t in TIMES])
        r2 = check_theorem2(_constant_decomps(H))
        assert r4.holds and r2.holds
        diff = (r4.fitted_phase - r2.fitted_phase + math.pi) % (2 * math.pi) - math.pi
        assert abs(diff) <= PHASE_TOL
        assert _rays_match(r4.predicted_basis, r2.predicted_basis)


@seed(11)
@given(s1=st.floats(-3, 3), mag=st.floats(0.1, 3), phi=st.floats(-math.pi, math.pi))
def test_theorem2_basis_diagonalizes_matched_system_block(s1, mag, phi):
    # [[s1, s2], [s2 e^{i phi}, s1]] with s2 = |s2| e^{-i phi/2} is Hermitian
    s2 = mag * np.exp(-0.5j * phi)
    M = np.array([[s1, s2], [s2 * np.exp(1j * phi), s1]])
    np.testing.assert_allclose(M, M.conj().T, atol=1e-12)
    rng = np.random.default_rng(0)
    Y = random_hermitian(3, rng)
    H = np.kron(M, np.eye(3)) + np.kron(M, Y) + np.kron(np.eye(2), random_hermitian(3, rng))
    rep = check_theorem2(_constant_decomps(H))
    assert rep.holds
    for v in rep.predicted_basis:
        w = M @ v
        assert np.linalg.norm(w - np.vdot(v, w) * v) < 1e-10


def _commuting_model(rng, env_dim=3):
    H_S = random_hermitian(2, rng)
    _, v = np.linalg.eigh(H_S)
    P0, P1 = np.outer(v[:, 0], v[:, 0].conj()), np.outer(v[:, 1], v[:, 1].conj())
    H_p = np.kron(P0, random_hermitian(env_dim, rng)) + np.kron(P1, random_hermitian(env_dim, rng))
    return H_S, random_hermitian(env_dim, rng), H_p


def test_consistency_chain_on_synthetic_commuting_models():
    for k in range(10):
        rng = np.random.default_rng(k)
        H_S, H_E, H_p = _commuting_model(rng)
        assert check_theorem3(H_S, H_p).holds
        m = HamiltonianModel(H_S, H_E, H_p, picture="schrodinger")
        res = commutation_block_residuals(m.evolutions(TIMES), SystemBlockHamiltonian.from_operator(H_S))
        assert max(res.values()) <= CHAIN_TOL


def test_consistency_chain_on_sbm():
    p = SBMParams(1.0, 1.0, 1.0)
    H_S, H_E, H_p = p.hamiltonian_terms()
    assert check_theorem3(H_S, H_p).holds
    m = HamiltonianModel(H_S, H_E, H_p, picture="schrodinger")
    res = commutation_block_residuals(m.evolutions(TIMES), SystemBlockHamiltonian.from_operator(H_S))
    assert max(res.values()) <= CHAIN_TOL


def test_chain_residuals_detect_non_commuting_dynamics():
    j = JCMParams(nbar=4, n_trunc=30)
    H_S, H_E, H_p = j.hamiltonian_terms()
    m = HamiltonianModel(H_S, H_E, H_p, picture="schrodinger")
    res = commutation_block_residuals(m.evolutions([0.0, 1.0]), SystemBlockHamiltonian.from_operator(H_S))
    assert max(res.values()) > 0.1


def test_sbm_pointer_observable_commutes_with_interaction_hamiltonian():
    p = SBMParams(1.0, 1.0, 1.0)
    H_S, H_E, H_p = p.hamiltonian_terms()
    basis = check_theorem1(_sbm_decomps(p), H_S=H_S).predicted_basis
    for t in TIMES:
        assert pointer_observable_commutator(basis, interaction_picture(H_S, H_E, H_p, t)) <= 1e-12


def test_caveat_flags_interaction_picture_only_predictions(rng):
    H = theorem4_synthetic(3, 0.0, rng)
    blocks = [interaction_blocks(H, t=t) for t in TIMES]
    assert check_theorem4(blocks, H_S=None).schrodinger_caveat
    assert check_theorem4(blocks, H_S=SIGMA_Z).schrodinger_caveat
    assert not check_theorem4(blocks, H_S=SIGMA_X).schrodinger_caveat
    assert not check_theorem4(blocks, H_S=np.zeros((2, 2))).schrodinger_caveat


def test_cross_validate_sbm_agrees():
    p = SBMParams(1.0, 1.0, 1.0)
    rep = check_theorem1(_sbm_decomps(p))
    scan = scan_pointer_candidates(p, p.env_initial(), TimeGrid.linspace(2 * np.pi, 25), 16, n_seeds=4)
    cv = cross_validate(rep, scan)
    assert cv.verdict == "agree" and max(cv.angle_errors) <= 0.5


def test_cross_validate_reports_no_prediction_and_disagreement():
    j = JCMParams(nbar=4, n_trunc=30)
    rep = check_theorem1([j.evolution(t) for t in (0.0, 1.0)])
    cand = PointerCandidate.from_angles(0.0, 0.0, 0.0, 0.0)
    assert cross_validate(rep, [cand]).verdict == "no-prediction"
    sbm = check_theorem1(_sbm_decomps(SBMParams(1.0, 1.0, 1.0)))
    eq = [PointerCandidate.from_angles(math.pi / 2, 0.0, 0.0, 0.0),
          PointerCandidate.from_angles(math.pi / 2, math.pi, 0.0, 0.0)]
    cv = cross_validate(sbm, eq)
    assert cv.verdict == "disagree" and min(cv.angle_errors) == pytest.approx(90.0, abs=1e-6)
    with pytest.raises(InvalidArgumentError):
        cross_validate(sbm, [])


def test_cross_validate_theorem4_synthetic_against_scan():
    rng = np.random.default_rng(8)
    phi = 0.9
    H = theorem4_synthetic(3, phi, rng)
    rep = check_theorem4([interaction_blocks(H, t=t) for t in TIMES])
    m = HamiltonianModel(np.zeros((2, 2)), np.zeros((3, 3)), H, picture="schrodinger")
    env0 = np.array([1.0, 0.0, 0.0], dtype=complex)
    scan = scan_pointer_candidates(m, env0, TimeGrid(TIMES), 24, n_seeds=4)
    cv = cross_validate(rep, scan)
    assert cv.verdict == "agree", cv


def test_run_all_orders_reports():
    p = SBMParams(1.0, 1.0, 1.0)
    H_S, H_E, H_p = p.hamiltonian_terms()
    reps = run_all(_sbm_decomps(p), H_S, H_p, interaction_blocks_series(H_S, H_E, H_p, TIMES[:4]))
    assert [r.theorem_id[0] for r in reps] == ["1", "2", "3", "4"]
    assert [r.holds for r in reps[:3]] == [True, False, True]
