import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quadgpe import (QuadraticModel, action_integral, evolve, evolve_auxiliary_cauchy, evolve_center,
                     evolve_delta2, gaussian_moments, gaussian_state, hamilton_ehrenfest,
                     lambda_flow, linearized_flow, symplectic_defect, symplectic_form)
from quadgpe.ehrenfest_flow import project_symplectic, step_halving_error
from quadgpe.states import PhaseSpaceOperator, WeylPolySymbol

from conftest import free_model, harmonic_model, modulated_model, nonlocal_model


def grid(t1, dt=1e-3, t0=0.0):
    return np.linspace(t0, t1, int(round((t1 - t0) / dt)) + 1)


def test_free_center():
    Z = evolve_center([1.0, 0.0], free_model(), grid(1.0))
    assert np.allclose(Z[-1], [1.0, 1.0], atol=1e-12)


def test_harmonic_center_quarter_period():
    Z = evolve_center([0.0, 1.0], harmonic_model(), grid(np.pi / 2, np.pi / 2000))
    assert np.allclose(Z[-1], [-1.0, 0.0], atol=1e-10)


def test_nonlocal_stiffened_rotation():
    m = QuadraticModel(n=1, kappa=0.5, Hzz=np.eye(2), Wzz=np.diag([0.0, 1.0]))
    T = np.pi / np.sqrt(1.5)
    ts = grid(T, T / 4000)
    Z = evolve_center([0.0, 1.0], m, ts)
    assert np.allclose(Z[-1], [0.0, -1.0], atol=1e-10)
    half = evolve_center([0.0, 1.0], m, grid(T, T / 8000))
    assert np.abs(Z[-1] - half[-1]).max() < 1e-12


def test_free_covariance():
    D = evolve_delta2(np.diag([0.5, 0.5]), free_model(), grid(2.0))
    assert np.allclose(D[-1], [[0.5, 1.0], [1.0, 2.5]], atol=1e-12)


def test_harmonic_isotropic_covariance_invariant():
    D = evolve_delta2(np.diag([0.5, 0.5]), harmonic_model(), grid(3.0))
    assert np.abs(D - np.diag([0.5, 0.5])).max() < 1e-12


def test_harmonic_covariance_swaps_axes():
    ts = grid(np.pi / 2, np.pi / 2000)
    D = evolve_delta2(np.diag([1.25, 0.25]), harmonic_model(), ts)
    L = linearized_flow(harmonic_model(), ts)
    assert np.allclose(D[-1], np.diag([0.25, 1.25]), atol=1e-10)
    assert np.allclose(D[-1], L[-1] @ np.diag([1.25, 0.25]) @ L[-1].T, atol=1e-11)


def test_delta2_rejects_asymmetric():
    with pytest.raises(ValueError):
        evolve_delta2(np.array([[1.0, 0.1], [0.0, 1.0]]), harmonic_model(), grid(1.0))


def test_rejects_non_increasing_times():
    with pytest.raises(ValueError):
        evolve_center([0.0, 1.0], harmonic_model(), [0.0, 0.5, 0.5])


def test_free_flow():
    L = linearized_flow(free_model(), grid(1.0))
    assert np.allclose(L[-1], [[1.0, 0.0], [1.0, 1.0]], atol=1e-12)
    assert np.array_equal(L[0], np.eye(2))


def test_harmonic_flow_is_rotation():
    ts = grid(2.0)
    L = linearized_flow(harmonic_model(), ts)
    c, s = np.cos(ts), np.sin(ts)
    R = np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], 1)
    assert np.abs(L - R).max() < 1e-12


def test_modulated_flow_symplectic():
    L = linearized_flow(modulated_model(), grid(10.0))
    assert symplectic_defect(L).max() <= 1e-9


def test_harmonic_action():
    ts = grid(np.pi / 4, np.pi / 4000)
    b = evolve([0.0, 1.0], np.diag([0.5, 0.5]), harmonic_model(), ts)
    assert np.allclose(b.S, -np.sin(2 * ts) / 4, atol=1e-12)
    assert b.S[-1] == pytest.approx(-0.25, abs=1e-12)


def test_free_action():
    b = evolve([1.0, 0.0], np.diag([0.5, 0.5]), free_model(), grid(2.0))
    assert b.S[-1] == pytest.approx(1.0, abs=1e-12)
    assert b.S[0] == 0.0


def test_trace_term_in_action():
    base = harmonic_model()
    m = harmonic_model(kappa=1.0, Www=np.diag([0.0, 1.0]))
    ts = grid(2.0)
    D0 = np.diag([0.5, 0.5])
    Z = evolve_center([0.0, 0.0], m, ts)
    D = evolve_delta2(D0, m, ts)
    S = action_integral(ts, Z, D, m)
    S0 = action_integral(ts, Z, D, base)
    assert np.allclose(S - S0, -0.25 * ts, atol=1e-12)


def test_action_needs_matching_grid():
    with pytest.raises(ValueError):
        action_integral(grid(1.0), np.zeros((3, 2)), np.zeros((3, 2, 2)), harmonic_model())


def test_action_step_halving_converges():
    m = nonlocal_model()
    err = step_halving_error([0.3, 1.0], np.diag([0.5, 0.5]), m, grid(5.0, 1e-2))
    assert err < 1e-8


def test_aliases():
    assert hamilton_ehrenfest is evolve


def test_lambda_zero_shift_mean_field_phase():
    m = nonlocal_model()
    ts = grid(2.0)
    b = evolve([0.3, 1.0], np.diag([0.6, 0.4]), m, ts)
    lam = lambda_flow([0.0, 0.0], m, ts, Delta2=b.Delta2, phase="mean-field")
    assert np.array_equal(lam.lam, np.zeros_like(lam.lam))
    tr = np.einsum("tij,tji->t", m.coefficients(ts)["Www"], b.Delta2)
    from scipy.integrate import cumulative_simpson
    ref = -0.5 * m.kappa_tilde * cumulative_simpson(tr, x=ts, initial=0.0)
    assert np.allclose(lam.S_lambda, ref, atol=1e-9)


def test_lambda_linear_phase_zero_shift_is_zero():
    lam = lambda_flow([0.0, 0.0], nonlocal_model(), grid(1.0))
    assert np.array_equal(lam.S_lambda, np.zeros_like(lam.S_lambda))


def test_lambda_free_position_shift_constant():
    lam = lambda_flow([0.0, 1.0], free_model(), grid(3.0))
    assert np.allclose(lam.lam, [0.0, 1.0], atol=0)
    assert np.allclose(lam.S_lambda, 0.0, atol=1e-15)


@pytest.mark.parametrize("phase", ["linear", "mean-field"])
def test_lambda_harmonic(phase):
    m = harmonic_model()
    ts = grid(np.pi / 2, np.pi / 4000)
    D = np.broadcast_to(np.diag([0.5, 0.5]), (ts.size, 2, 2))
    lam = lambda_flow([0.0, 1.0], m, ts, Delta2=D, phase=phase)
    assert np.allclose(lam.lam[-1], [-1.0, 0.0], atol=1e-10)
    assert lam.S_lambda[ts.size // 2] == pytest.approx(-0.25, abs=1e-12)


def test_lambda_equals_flow_times_initial():
    m = nonlocal_model()
    ts = grid(4.0)
    lam = lambda_flow([0.2, -0.7], m, ts)
    L = linearized_flow(m, ts)
    assert np.abs(lam.lam - L @ np.array([0.2, -0.7])).max() < 1e-12


def test_auxiliary_identity_equals_base():
    m = nonlocal_model()
    g = gaussian_state(1, Q=0.2 + 1.5j, center=[0.3, 1.0])
    mo = gaussian_moments(g)
    ts = grid(1.0)
    a = evolve(mo.Z, mo.Delta2, m, ts)
    gA = PhaseSpaceOperator.identity(1, 1.0).apply(g)
    moA = gaussian_moments(gA)
    b = evolve_auxiliary_cauchy(moA.Z, moA.Delta2, m, ts)
    for f in ("Z", "Delta2", "Lambda", "S"):
        assert np.array_equal(getattr(a, f), getattr(b, f))


def test_auxiliary_initial_data_shift_and_x():
    g = gaussian_state(1, center=[0.1, 0.2])
    shifted = gaussian_moments(PhaseSpaceOperator.displacement([0.0, 0.7], 1.0).apply(g))
    assert np.allclose(shifted.Z, [0.1, 0.9]) and np.allclose(shifted.Delta2, np.diag([0.5, 0.5]))
    x = gaussian_moments(gaussian_state(1).apply_weyl(WeylPolySymbol.from_terms(1, {(0, 1): 1.0})))
    assert np.allclose(x.Z, 0.0, atol=1e-15) and np.allclose(x.Delta2, np.diag([1.5, 1.5]))


def test_bundle_at():
    b = evolve([0.0, 1.0], np.eye(2) * 0.5, harmonic_model(), grid(1.0))
    assert b.at(0.5) == 500
    assert b.at(0.5004) == 500


def test_projection_restores_symplecticity():
    L = linearized_flow(harmonic_model(), grid(1.0))[-1]
    bad = L + 1e-6 * np.array([[1.0, 0.3], [0.2, -0.5]])
    assert symplectic_defect(bad[None])[0] > 1e-7
    assert symplectic_defect(project_symplectic(bad)[None])[0] < 1e-14


@pytest.mark.parametrize("make", [free_model, harmonic_model, modulated_model])
@pytest.mark.parametrize("kappa", [0.0, 0.3])
def test_invariants(make, kappa):
    m = make(kappa=kappa, Wzz=np.diag([0.0, 1.0]), Wzw=np.diag([0.0, 1.0]),
             Www=np.diag([0.0, 1.0]))
    ts = grid(10.0)
    D0 = np.array([[0.7, 0.1], [0.1, 0.4]])
    b = evolve([0.3, 1.0], D0, m, ts)
    assert symplectic_defect(b.Lambda).max() <= 1e-9
    fact = b.Lambda @ D0 @ np.swapaxes(b.Lambda, 1, 2)
    assert np.abs(b.Delta2 - fact).max() <= 1e-8
    det = np.linalg.det(b.Delta2)
    assert np.abs(det / det[0] - 1).max() <= 1e-8
    assert np.abs(b.Delta2 - np.swapaxes(b.Delta2, 1, 2)).max() == 0.0


vec = st.lists(st.floats(-3, 3), min_size=2, max_size=2).map(np.array)


@settings(max_examples=25, deadline=None)
@given(vec, vec, st.floats(-2, 2), st.floats(-2, 2))
def test_lambda_linearity(l0, m0, a, b):
    m = nonlocal_model()
    ts = grid(3.0, 1e-2)
    L = lambda_flow(a * l0 + b * m0, m, ts).lam
    R = a * lambda_flow(l0, m, ts).lam + b * lambda_flow(m0, m, ts).lam
    assert np.abs(L - R).max() <= 1e-10 * max(1.0, np.abs(R).max())


@settings(max_examples=20, deadline=None)
@given(st.floats(0.1, 3.0), st.floats(-1, 1), st.floats(-1, 1), st.floats(0.0, 0.6))
def test_symplectic_for_random_quadratic_models(w, c, d, kt):
    H = np.array([[1.0, c], [c, w]])
    m = QuadraticModel(n=1, kappa_tilde=kt, Hzz=H, Wzz=np.array([[0.0, d], [d, 1.0]]))
    L = linearized_flow(m, grid(5.0, 5e-3))
    assert symplectic_defect(L).max() <= 1e-9
    J = symplectic_form(1)
    assert np.allclose(L[-1].T @ J @ L[-1], J, atol=1e-9)
