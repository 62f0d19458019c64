import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pointerlab.bloch import (
    BlochTrajectory,
    bloch_vector,
    detect_asymptote,
    reconstruct,
    trailing_window_max,
    trajectory,
)
from pointerlab.evolution import TimeGrid, propagate
from pointerlab.exceptions import InvalidArgumentError
from pointerlab.hilbert import KET_A, KET_B, random_state, tensor
from pointerlab.models import SpinSpinParams, spin_spin_decoherence_factor

BLOCH_TOL = 1e-12
SETTLE_TOL_CHECK = 0.02


def test_bloch_vector_of_standard_states():
    np.testing.assert_allclose(bloch_vector(np.outer(KET_A, KET_A)), [0, 0, 1], atol=BLOCH_TOL)
    np.testing.assert_allclose(bloch_vector(np.outer(KET_B, KET_B)), [0, 0, -1], atol=BLOCH_TOL)
    plus = (KET_A + KET_B) / math.sqrt(2)
    np.testing.assert_allclose(bloch_vector(np.outer(plus, plus)), [1, 0, 0], atol=BLOCH_TOL)
    yp = (KET_A + 1j * KET_B) / math.sqrt(2)
    np.testing.assert_allclose(bloch_vector(np.outer(yp, yp.conj())), [0, 1, 0], atol=BLOCH_TOL)
    np.testing.assert_allclose(bloch_vector(np.eye(2) / 2), [0, 0, 0], atol=BLOCH_TOL)


@given(seed=st.integers(0, 2**32 - 1))
def test_bloch_round_trip_pure_state_has_unit_length(seed):
    psi = random_state(2, np.random.default_rng(seed))
    rho = np.outer(psi, psi.conj())
    R = bloch_vector(rho)
    assert np.linalg.norm(R) == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(reconstruct(R), rho, atol=1e-12)


def test_bloch_vector_validation():
    with pytest.raises(InvalidArgumentError):
        bloch_vector(np.eye(3) / 3)
    with pytest.raises(InvalidArgumentError):
        bloch_vector(np.eye(2))
    with pytest.raises(InvalidArgumentError):
        bloch_vector(np.array([[0.5, 1.0], [0.0, 0.5]]))


def test_trajectory_length_check():
    with pytest.raises(InvalidArgumentError):
        trajectory([], TimeGrid.linspace(1.0, 3))


def _synthetic(R_of_t, n=200, t_max=10.0):
    t = np.linspace(0, t_max, n)
    return BlochTrajectory(t, np.array([R_of_t(x) for x in t]))


def test_settled_and_polarized_limit():
    tr = _synthetic(lambda t: [0.6 * math.exp(-t), 0.0, 0.8])
    rep = detect_asymptote(tr)
    assert rep.settled and not rep.unpolarized
    assert rep.R_inf == pytest.approx([0, 0, 0.8], abs=1e-3)
    top, bottom = rep.preferred_basis
    assert abs(top[0]) == pytest.approx(1.0, abs=1e-3)
    assert rep.window[0] == pytest.approx(7.5, abs=0.06)


def test_settled_but_unpolarized():
    rep = detect_asymptote(_synthetic(lambda t: [0.01, 0.0, 0.01]))
    assert rep.settled and rep.unpolarized and rep.preferred_basis is None


def test_oscillating_record_does_not_settle():
    rep = detect_asymptote(_synthetic(lambda t: [0.3 * math.cos(5 * t), 0.0, 0.5]))
    assert not rep.settled
    assert rep.drift == pytest.approx(0.6, abs=0.01)
    assert rep.preferred_basis is None


def test_asymptote_argument_checks():
    with pytest.raises(InvalidArgumentError):
        detect_asymptote(_synthetic(lambda t: [0, 0, 1], n=5))
    with pytest.raises(InvalidArgumentError):
        detect_asymptote(_synthetic(lambda t: [0, 0, 1]), window_fraction=0.9)


def test_spin_spin_bloch_components_follow_decoherence_factor():
    theta = math.radians(60)
    p = SpinSpinParams(0.0, [1.0, 1.2, 0.8, 0.95])
    sys0 = np.array([math.cos(theta / 2), math.sin(theta / 2)])
    grid = TimeGrid.linspace(20.0, 101)
    tr = trajectory(propagate(tensor(sys0, p.env_initial()), p, grid), grid)
    r = spin_spin_decoherence_factor(p, grid.points)
    rab0 = math.cos(theta / 2) * math.sin(theta / 2)
    np.testing.assert_allclose(tr.R[:, 0], 2 * (rab0 * r).real, atol=1e-12)
    np.testing.assert_allclose(tr.R[:, 1], -2 * (rab0 * r).imag, atol=1e-12)
    np.testing.assert_allclose(tr.R[:, 2], math.cos(theta), atol=1e-12)
    assert trailing_window_max(tr, 2) == pytest.approx(0.5, abs=1e-12)


@given(seed=st.integers(0, 2**32 - 1), mix=st.floats(0, 1))
def test_purity_bloch_identity_for_mixed_states(seed, mix):
    from pointerlab.hilbert import purity

    rng = np.random.default_rng(seed)
    u, v = random_state(2, rng), random_state(2, rng)
    rho = mix * np.outer(u, u.conj()) + (1 - mix) * np.outer(v, v.conj())
    R = bloch_vector(rho)
    assert np.linalg.norm(R) <= 1 + 1e-9
    assert purity(rho) == pytest.approx((1 + R @ R) / 2, abs=1e-10)
    np.testing.assert_allclose(bloch_vector(reconstruct(R)), R, atol=1e-12)


@given(R=st.tuples(st.floats(-0.57, 0.57), st.floats(-0.57, 0.57), st.floats(-0.57, 0.57)))
def test_reconstruct_then_bloch_vector_is_identity(R):
    np.testing.assert_allclose(bloch_vector(reconstruct(np.array(R))), R, atol=1e-12)


def test_preferred_basis_are_exact_eigenvectors():
    rep = detect_asymptote(_synthetic(lambda t: [0.3, -0.2, 0.4 + 0.1 * math.exp(-3 * t)]))
    assert rep.settled
    rho = reconstruct(rep.R_inf)
    r = np.linalg.norm(rep.R_inf)
    top, bottom = rep.preferred_basis
    np.testing.assert_allclose(rho @ top, (1 + r) / 2 * top, atol=1e-10)
    np.testing.assert_allclose(rho @ bottom, (1 - r) / 2 * bottom, atol=1e-10)


def test_asymptote_verdict_stable_under_grid_refinement():
    from pointerlab.config import load_config
    from pointerlab.cli import build_scenario

    sc = build_scenario(load_config("spinspin.cfg"), seed=None, tol=None)
    grids = [sc.grid, sc.grid.refined()]
    reps = []
    for g in grids:
        tr = trajectory(propagate(tensor(sc.system_initial, sc.env_initial), sc.model, g), g)
        reps.append(detect_asymptote(tr))
    assert reps[0].settled == reps[1].settled
    assert np.max(np.abs(reps[0].R_inf - reps[1].R_inf)) <= SETTLE_TOL_CHECK


def test_jcm_collapse_revival_is_not_settled():
    from pointerlab.models import JCMParams

    p = JCMParams(nbar=25)
    grid = TimeGrid.linspace(1.5 * p.revival_time, 301)
    tr = trajectory(propagate(tensor(KET_A, p.env_initial()), p, grid), grid)
    assert not detect_asymptote(tr).settled

