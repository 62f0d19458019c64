import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pointerlab.evolution import (
    EvolutionDecomposition,
    HamiltonianModel,
    TimeDependentModel,
    TimeGrid,
    decompose,
    interaction_picture,
    propagate,
    time_ordered_exponential,
)
from pointerlab.exceptions import InvalidArgumentError, NumericFailureError, TruncationError
from pointerlab.hilbert import (
    KET_A,
    SIGMA_X,
    SIGMA_Z,
    commutator,
    fidelity,
    matrix_exponential_unitary,
    random_hermitian,
    random_state,
    random_unitary,
    tensor,
)
from pointerlab.models import (
    JCMParams,
    SBMParams,
    coherent_state,
    fock_state,
    jcm_env_operators,
    jcm_interaction_hamiltonian,
)
from pointerlab.pointer import parallelism_defect


def test_decompose_identity_and_system_flip():
    d = decompose(np.eye(6))
    np.testing.assert_array_equal(d.E1, np.eye(3))
    np.testing.assert_array_equal(d.E2, np.zeros((3, 3)))
    d = decompose(np.kron(SIGMA_X, np.eye(3)))
    np.testing.assert_array_equal(d.E1, np.zeros((3, 3)))
    np.testing.assert_array_equal(d.E2, np.eye(3))
    np.testing.assert_array_equal(d.E3, np.eye(3))
    np.testing.assert_array_equal(d.E4, np.zeros((3, 3)))


def test_decompose_rejects_non_unitary_and_bad_basis():
    with pytest.raises(InvalidArgumentError):
        decompose(2 * np.eye(4))
    with pytest.raises(InvalidArgumentError):
        decompose(np.eye(4), system_basis=(KET_A, KET_A))


@pytest.mark.parametrize("t", [0.5, 3.3])
def test_decompose_of_exponentiated_jcm(t):
    p = JCMParams(nbar=4, n_trunc=30)
    d = decompose(matrix_exponential_unitary(jcm_interaction_hamiltonian(p), t))
    ref = jcm_env_operators(p, t)
    for got, want in zip(d.blocks, ref.blocks):
        np.testing.assert_allclose(got, want, atol=1e-10)


def test_decomposition_at_time_zero_is_identity():
    d = jcm_env_operators(JCMParams(nbar=4, n_trunc=30), 0.0)
    np.testing.assert_allclose(d.E1, np.eye(31), atol=1e-12)
    np.testing.assert_allclose(d.E4, np.eye(31), atol=1e-12)
    assert np.max(np.abs(d.E2)) <= 1e-12 and np.max(np.abs(d.E3)) <= 1e-12


def test_decompose_assemble_round_trip_random(rng):
    for _ in range(100):
        d = int(rng.integers(2, 17))
        U = random_unitary(2 * d, rng)
        np.testing.assert_allclose(decompose(U).assemble(), U, atol=1e-12)


@given(seed=st.integers(0, 2**32 - 1), d=st.integers(1, 8))
def test_basis_covariance(seed, d):
    rng = np.random.default_rng(seed)
    U = random_unitary(2 * d, rng)
    W = random_unitary(2, rng)
    basis = (W[:, 0], W[:, 1])
    rotated = decompose(U, system_basis=basis)
    np.testing.assert_allclose(rotated.assemble(computational=True), U, atol=1e-10)
    back = decompose(rotated.assemble(computational=True))
    for got, want in zip(back.blocks, decompose(U).blocks):
        np.testing.assert_allclose(got, want, atol=1e-10)


def test_interaction_picture_commuting_case_and_t0(rng):
    # single-mode dephasing: [H0, H'] = 0 when the mode is frozen
    H_S = 0.5 * SIGMA_Z
    H_E = np.zeros((4, 4))
    X = random_hermitian(4, rng)
    Hp = np.kron(SIGMA_Z, X)
    np.testing.assert_allclose(interaction_picture(H_S, H_E, Hp, 1.7), Hp, atol=1e-13)
    Hx = np.kron(SIGMA_X, X)
    np.testing.assert_allclose(interaction_picture(H_S, random_hermitian(4, rng), Hx, 0.0), Hx, atol=1e-13)


def test_interaction_picture_against_nested_commutator_series(rng):
    w0, t = 0.8, 0.05
    H_S = 0.5 * w0 * SIGMA_Z
    H_E = np.zeros((3, 3))
    X = random_hermitian(3, rng)
    Hp = np.kron(SIGMA_X, X)
    A = np.kron(H_S, np.eye(3))
    term, series = Hp.copy(), Hp.copy()
    for k in range(1, 7):
        term = 1j * t * commutator(A, term) / k
        series = series + term
    np.testing.assert_allclose(interaction_picture(H_S, H_E, Hp, t), series, atol=1e-12)
    # closed form: sigma_x picks up a phase rotation at the splitting frequency
    sx_t = np.array([[0, np.exp(1j * w0 * t)], [np.exp(-1j * w0 * t), 0]])
    np.testing.assert_allclose(interaction_picture(H_S, H_E, Hp, t), np.kron(sx_t, X), atol=1e-13)


def test_interaction_picture_dimension_mismatch(rng):
    with pytest.raises(InvalidArgumentError):
        interaction_picture(SIGMA_Z, np.zeros((3, 3)), np.eye(4), 0.1)


def test_propagate_returns_initial_at_zero_and_branch_formula(rng):
    p = JCMParams(nbar=4, n_trunc=30)
    s0 = tensor(random_state(2, rng), p.env_initial())
    grid = TimeGrid.linspace(2.0, 5)
    out = propagate(s0, p, grid)
    np.testing.assert_array_equal(out[0].vector, s0.vector)
    d = jcm_env_operators(p, 2.0)
    np.testing.assert_allclose(out[-1].A, d.E1 @ s0.A + d.E2 @ s0.B, atol=1e-14)
    np.testing.assert_allclose(out[-1].B, d.E3 @ s0.A + d.E4 @ s0.B, atol=1e-14)
    for s in out:
        assert abs(s.norm2 - 1.0) < 1e-9


def test_propagate_jcm_plus_stays_near_product():
    p = JCMParams(nbar=100, phi=0.3, n_trunc=200)
    grid = TimeGrid.linspace(p.revival_time / 4, 60)
    sys = np.array([np.exp(-1j * p.phi), 1]) / np.sqrt(2)
    out = propagate(tensor(sys, p.env_initial()), p, grid)
    assert max(parallelism_defect(s.A, s.B) for s in out) <= 1e-2


def test_propagate_sbm_excited_branch_is_displaced_vacuum():
    p = SBMParams(omega0=1.0, omega=1.0, g=1.0, n_trunc=64)
    grid = TimeGrid.linspace(5.0, 11)
    for t, s in zip(grid, propagate(tensor(KET_A, fock_state(0, 64)), p, grid)):
        assert np.linalg.norm(s.B) == 0.0
        assert fidelity(s.A, coherent_state(p.lam(t), 64)) > 1 - 1e-10


def test_propagate_detects_leakage():
    p = JCMParams(nbar=25, n_trunc=80)
    # a top-level Fock state spreads into the last retained level at once
    env = fock_state(80, 80)
    with pytest.raises(TruncationError) as info:
        propagate(tensor(KET_A, env), p, TimeGrid.linspace(1.0, 4))
    assert info.value.time == 0.0


def test_time_grid_validation_and_refinement():
    with pytest.raises(InvalidArgumentError):
        TimeGrid([0.0])
    with pytest.raises(InvalidArgumentError):
        TimeGrid([0.1, 0.2])
    with pytest.raises(InvalidArgumentError):
        TimeGrid([0.0, 0.2, 0.2])
    g = TimeGrid([0.0, 1.0, 3.0]).refined()
    np.testing.assert_array_equal(g.points, [0.0, 0.5, 1.0, 2.0, 3.0])


def test_hamiltonian_model_interaction_picture_matches_dephasing_closed_form(rng):
    # H = w0/2 sz + sz (x) X with the environment self-energy switched off
    X = random_hermitian(3, rng)
    m = HamiltonianModel(0.5 * SIGMA_Z, np.zeros((3, 3)), np.kron(SIGMA_Z, X))
    d = m.evolution(1.3)
    np.testing.assert_allclose(d.E1, matrix_exponential_unitary(X, 1.3), atol=1e-12)
    np.testing.assert_allclose(d.E4, matrix_exponential_unitary(-X, 1.3), atol=1e-12)


def _operator_infidelity(U, V):
    return 1.0 - abs(np.trace(U.conj().T @ V)) / U.shape[0]


def test_time_ordered_exponential_constant_and_driven(rng):
    H = random_hermitian(4, rng)
    U = time_ordered_exponential(lambda t: H, 0.0, 2.0)
    np.testing.assert_allclose(U, matrix_exponential_unitary(H, 2.0), atol=1e-12)
    # commuting H(t): the exact answer is exp(-i int H dt); convergence is
    # judged on fidelity, so compare at that level
    U = time_ordered_exponential(lambda t: np.cos(t) * SIGMA_Z, 0.0, 1.5)
    assert _operator_infidelity(U, matrix_exponential_unitary(SIGMA_Z, np.sin(1.5))) < 1e-8


def test_time_ordered_exponential_non_commuting_converges():
    H = lambda t: SIGMA_X + t * SIGMA_Z  # noqa: E731
    U1 = time_ordered_exponential(H, 0.0, 1.0, fidelity_tol=1e-12)
    # split the interval and compose: the ordering must be consistent
    U2 = time_ordered_exponential(H, 0.5, 1.0, fidelity_tol=1e-12) @ \
        time_ordered_exponential(H, 0.0, 0.5, fidelity_tol=1e-12)
    assert 1 - abs(np.trace(U1.conj().T @ U2)) / 2 < 1e-9


def test_time_ordered_exponential_gives_up():
    with pytest.raises(NumericFailureError):
        time_ordered_exponential(lambda t: np.cos(50 * t) * SIGMA_X + t * SIGMA_Z, 0.0, 5.0,
                                 fidelity_tol=1e-15, max_steps=64)


def test_time_dependent_model_accumulates_propagators(rng):
    H_int = lambda t: np.kron(SIGMA_X, np.eye(2)) * np.cos(t)  # noqa: E731
    m = TimeDependentModel(H_int, env_dim=2)
    ds = m.evolutions([0.0, 0.7, 1.4])
    U = matrix_exponential_unitary(np.kron(SIGMA_X, np.eye(2)), np.sin(1.4))
    assert _operator_infidelity(ds[-1].assemble(), U) < 1e-8
    assert _operator_infidelity(m.evolution(1.4).assemble(), U) < 1e-8


def test_evolution_decomposition_identity_constructor():
    d = EvolutionDecomposition.identity(3)
    np.testing.assert_array_equal(d.assemble(), np.eye(6))
