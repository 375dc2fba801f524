import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quadgpe import (Constant, Modulated, QuadraticModel, Sampled, effective_linear_matrix,
                     symplectic_form, validate_model)


def test_symplectic_form_n1():
    assert np.array_equal(symplectic_form(1), [[0, -1], [1, 0]])


def test_symplectic_square_is_minus_identity():
    J = symplectic_form(1)
    assert np.array_equal(J @ J, -np.eye(2))


def test_symplectic_antisymmetric_n3():
    J = symplectic_form(3)
    assert np.array_equal(J.T, -J)
    assert np.array_equal(J[:3, 3:], -np.eye(3))


def test_symplectic_rejects_zero():
    with pytest.raises(ValueError):
        symplectic_form(0)


def test_valid_harmonic_model():
    assert validate_model(QuadraticModel(n=1, Hzz=np.eye(2))) == []


def test_asymmetric_kernel_reported():
    m = QuadraticModel(n=1, Hzz=np.eye(2), Wzz=np.array([[0.0, 1.0], [0.0, 0.0]]))
    diags = validate_model(m)
    assert any("Wzz not symmetric" in d for d in diags)


def test_window_not_covered():
    m = QuadraticModel(n=1, Hzz=Sampled([0.0, 1.0], [np.eye(2), 2 * np.eye(2)]))
    diags = validate_model(m, (0.0, 2.0))
    assert any("time window not covered" in d for d in diags)


def test_validate_never_raises_on_garbage():
    m = QuadraticModel(n=1, Hzz=np.array([[np.nan, 0.0], [0.0, 1.0]]), hbar=-1.0)
    assert len(validate_model(m)) >= 1


@pytest.mark.parametrize("kt, Hzz, Wzz, expected", [
    (0.0, np.eye(2), np.zeros((2, 2)), np.eye(2)),
    (1.0, np.diag([1.0, 0.0]), np.diag([0.0, 1.0]), np.eye(2)),
    (0.5, np.eye(2), np.eye(2), 1.5 * np.eye(2)),
])
def test_effective_linear_matrix(kt, Hzz, Wzz, expected):
    m = QuadraticModel(n=1, kappa_tilde=kt, Hzz=Hzz, Wzz=Wzz)
    assert np.allclose(effective_linear_matrix(m, 0.3), expected, atol=1e-15)


def test_kappa_tilde_from_norm():
    m = QuadraticModel(n=1, kappa=0.3, norm2=2.0)
    assert m.kappa_tilde == pytest.approx(0.6)
    assert QuadraticModel(n=1, kappa=0.3).kappa_tilde == 0.3


def test_sampled_returns_knot_values_exactly():
    knots = np.array([0.0, 0.3, 1.7])
    vals = np.random.default_rng(1).normal(size=(3, 2, 2))
    p = Sampled(knots, vals)
    for k, v in zip(knots, vals):
        assert np.array_equal(p(k), v)


def test_sampled_interpolates_linearly():
    p = Sampled([0.0, 2.0], [np.zeros((2, 2)), 2 * np.eye(2)])
    assert np.allclose(p(0.5), 0.5 * np.eye(2))


def test_sampled_outside_window_raises():
    p = Sampled([0.0, 1.0], [np.eye(2), np.eye(2)])
    with pytest.raises(ValueError):
        p(1.5)


def test_sampled_needs_increasing_knots():
    with pytest.raises(ValueError):
        Sampled([0.0, 0.0], [np.eye(2), np.eye(2)])


def test_modulated_profile():
    p = Modulated(np.zeros((2, 2)), 1.0, 0.1, 2.0)
    assert np.allclose(p(0.0), np.diag([0.0, 1.1]))
    assert np.allclose(p(np.pi / 4), np.diag([0.0, 1.0]))


def test_constant_is_immutable():
    c = Constant(np.eye(2))
    with pytest.raises(ValueError):
        c.value[0, 0] = 3.0


sym2 = st.lists(st.floats(-5, 5), min_size=3, max_size=3).map(
    lambda v: np.array([[v[0], v[1]], [v[1], v[2]]]))


@settings(max_examples=50, deadline=None)
@given(sym2, sym2, st.floats(-2, 2), st.floats(0, 10))
def test_effective_matrix_symmetric_traceless_action(H, W, kt, t):
    m = QuadraticModel(n=1, kappa_tilde=kt, Hzz=H, Wzz=W)
    M = effective_linear_matrix(m, t)
    scale = max(1.0, np.abs(M).max())
    assert np.abs(M - M.T).max() <= 1e-14 * scale
    assert abs(np.trace(symplectic_form(1) @ M)) <= 1e-12 * scale
