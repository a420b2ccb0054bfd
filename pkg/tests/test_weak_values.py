import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wmopt.errors import DimensionError
from wmopt.states import (
    SIGMA_Z,
    SPIN_KETS,
    ket_to_dm,
    random_effect,
    random_hermitian,
    random_mixed_state,
    random_pure_state,
    sample_rng,
)
from wmopt.weak_values import cauchy_schwarz_report, weak_value_triple, weak_values


def dm(label):
    return ket_to_dm(SPIN_KETS[label])


def test_triple_eigenstate_postselection():
    t = weak_value_triple(dm("+z"), dm("+x"), SIGMA_Z)
    assert np.allclose([t.omega, t.alpha, t.beta], [0.5, 0.5, 0.5])


def test_triple_orthogonal():
    t = weak_value_triple(dm("-x"), dm("+x"), SIGMA_Z)
    assert np.allclose([t.omega, t.alpha, t.beta], [0, 0, 1], atol=1e-15)


def test_triple_no_postselection():
    rho = random_mixed_state(3, 4).matrix
    A = random_hermitian(3, 5).matrix
    t = weak_value_triple(np.eye(3), rho, A)
    assert np.isclose(t.omega, 1)
    assert np.isclose(t.alpha, np.trace(A @ rho))
    assert np.isclose(t.beta, np.trace(A @ A @ rho).real)


def test_triple_dimension_error():
    with pytest.raises(DimensionError):
        weak_value_triple(np.eye(3), np.eye(2) / 2, SIGMA_Z)


def test_canonical_values():
    _, cw = weak_values(dm("+z"), dm("+x"), SIGMA_Z)
    assert not cw.orthogonal_flag
    assert np.isclose(cw.A_w, 1) and np.isclose(cw.B_w, 1)
    assert np.isclose(abs(cw.A_w) ** 2, cw.B_w)
    _, cw = weak_values(dm("-x"), dm("+x"), SIGMA_Z)
    assert cw.orthogonal_flag and cw.A_w is None


def test_canonical_mixed_eigen_case():
    _, cw = weak_values(dm("+z"), np.eye(2) / 2, SIGMA_Z)
    assert np.isclose(cw.A_w, 1) and np.isclose(cw.B_w, 1)


def test_second_order_weak_value():
    # C_w = Tr[E A^2 rho]/omega; sigma_z^2 = 1 so C_w = 1
    _, cw = weak_values(dm("+y"), dm("+x"), SIGMA_Z)
    assert np.isclose(cw.C_w, 1)


def test_report_pure_pair():
    rep = cauchy_schwarz_report(random_pure_state(3, 1), random_pure_state(3, 2), random_hermitian(3, 3))
    assert rep.equality and rep.equality_reason == "shifted_null_vector"


def test_report_strict():
    rep = cauchy_schwarz_report(np.eye(2) / 2, np.eye(2) / 2, SIGMA_Z)
    # alpha = Tr[sigma_z]/4 = 0, beta = omega = 1/2
    assert rep.lhs == 0 and np.isclose(rep.rhs, 0.25)
    assert not rep.equality and rep.equality_reason == "none"


def test_report_orthogonal():
    rep = cauchy_schwarz_report(dm("-x"), dm("+x"), SIGMA_Z)
    assert rep.equality and rep.equality_reason == "omega_zero"


def test_report_beta_zero():
    A = np.diag([0.0, 1.0])
    rep = cauchy_schwarz_report(np.eye(2) / 2, dm("+z"), A)
    assert rep.equality and rep.equality_reason == "beta_zero"


def test_report_mixed_eigen_case():
    rep = cauchy_schwarz_report(dm("+z"), np.eye(2) / 2, SIGMA_Z)
    assert rep.equality and rep.equality_reason == "shifted_null_vector"


@given(st.integers(0, 10**6), st.sampled_from([2, 3, 4, 8]))
def test_pure_pairs_on_boundary(index, d):
    rng = sample_rng(1, index)
    A = random_hermitian(d, rng)
    t = weak_value_triple(random_effect(d, rng, pure=True), random_pure_state(d, rng), A)
    assert abs(abs(t.alpha) ** 2 - t.beta * t.omega) <= 1e-9 * t.beta * t.omega


@given(st.integers(0, 10**6), st.sampled_from([2, 3, 4, 8]))
def test_mixed_pairs_inside(index, d):
    rng = sample_rng(2, index)
    A = random_hermitian(d, rng)
    E = random_effect(d, rng)
    rho = random_mixed_state(d, rng)
    t = weak_value_triple(E, rho, A)
    assert abs(t.alpha) ** 2 <= t.beta * t.omega + 1e-12
    trE = np.trace(E.matrix).real
    amax2 = np.max(np.abs(np.linalg.eigvalsh(A.matrix))) ** 2
    assert -1e-12 <= t.omega <= trE + 1e-12
    assert -1e-12 <= t.beta <= trE * amax2 * (1 + 1e-12)


@given(st.integers(0, 10**6))
def test_complement_triple(index):
    rng = sample_rng(3, index)
    A = random_hermitian(3, rng).matrix
    E = random_effect(3, rng).matrix
    rho = random_mixed_state(3, rng).matrix
    t = weak_value_triple(E, rho, A)
    tc = weak_value_triple(np.eye(3) - E, rho, A)
    assert np.isclose(tc.omega, 1 - t.omega)
    assert np.isclose(tc.alpha, np.trace(A @ rho) - t.alpha)
    assert np.isclose(tc.beta, np.trace(A @ A @ rho).real - t.beta)
