import numpy as np
import pytest

from quadgpe import (Grid, GridState, QuadraticModel, StepSizeError, UnsupportedModelError,
                     centered_second_moments, check_grid_model, compare_l2, direct_nonlocal_potential,
                     effective_potential, gaussian_state, residual_norm, solve_cauchy,
                     split_step_evolve)

from conftest import free_model, harmonic_model, nonlocal_model

W1 = np.diag([0.0, 1.0])


def grid(t1, dt=1e-3, t0=0.0):
    return np.linspace(t0, t1, int(round((t1 - t0) / dt)) + 1)


def test_free_spreading_variance():
    g = Grid.uniform(1, -20.0, 20.0, 1024)
    out = split_step_evolve(gaussian_state(1).sample(g), free_model(), grid(1.0), save_every=1000)
    D = centered_second_moments(out[-1])
    assert D[1, 1] == pytest.approx(0.5 * (1 + 1.0 ** 2), abs=1e-6)


def test_coherent_state_modulus_periodic():
    g = Grid.uniform(1, -12.0, 12.0, 512)
    psi0 = gaussian_state(1, center=[0.0, 1.5]).sample(g)
    ts = np.linspace(0.0, 2 * np.pi, 6001)
    out = split_step_evolve(psi0, harmonic_model(), ts, save_every=6000)
    a = psi0.with_values(np.abs(psi0.values))
    b = out[-1].with_values(np.abs(out[-1].values))
    assert compare_l2(a, b)["raw_l2"] <= 1e-5


def test_trace_phase_drift():
    g = Grid.uniform(1, -12.0, 12.0, 512)
    psi0 = gaussian_state(1).sample(g)
    ts = grid(2.0)
    kt = 0.4
    lin = split_step_evolve(psi0, harmonic_model(), ts, save_every=2000)[-1]
    nl = split_step_evolve(psi0, harmonic_model(kappa=kt, Www=W1), ts, save_every=2000)[-1]
    phase = compare_l2(lin, nl)["best_phase"]
    assert phase == pytest.approx(-0.5 * kt * 0.5 * 2.0, abs=1e-4)


def test_norm_conservation_long_run():
    g = Grid.uniform(1, -16.0, 16.0, 256)
    psi0 = gaussian_state(1, Q=0.2 + 1.5j, center=[0.3, 1.0]).sample(g)
    out = split_step_evolve(psi0, nonlocal_model(), grid(10.0), save_every=1000)
    assert max(abs(s.norm() - 1.0) for s in out) <= 1e-8


def test_second_order_convergence():
    g = Grid.uniform(1, -16.0, 16.0, 512)
    psi0 = gaussian_state(1, Q=0.2 + 1.5j, center=[0.3, 1.0]).sample(g)
    m = nonlocal_model()

    def run(dt):
        return split_step_evolve(psi0, m, grid(2.0, dt), save_every=10 ** 9)[-1]

    ref = run(0.0025)
    e1 = compare_l2(run(0.02), ref)["raw_l2"]
    e2 = compare_l2(run(0.01), ref)["raw_l2"]
    assert 3.5 <= e1 / e2 <= 4.5


def test_effective_potential_bare():
    g = Grid.uniform(1, -10.0, 10.0, 256)
    m = QuadraticModel(n=1, kappa=0.7, Hzz=np.eye(2), Hz=[0.0, 0.3])
    snap = effective_potential(gaussian_state(1, center=[0.0, 1.0]).sample(g), m, 0.0)
    assert np.allclose(snap.quadratic, [[0.5]]) and np.allclose(snap.linear, [0.3])
    assert snap.scalar == 0.0


def test_effective_potential_centered_linear_term():
    g = Grid.uniform(1, -10.0, 10.0, 256)
    m = QuadraticModel(n=1, kappa=0.7, Hzz=np.eye(2), Wzw=W1)
    snap = effective_potential(gaussian_state(1).sample(g), m, 0.0)
    assert abs(snap.linear[0]) < 1e-14


def test_effective_potential_scalar():
    g = Grid.uniform(1, -10.0, 10.0, 256)
    kappa = 0.6
    m = QuadraticModel(n=1, kappa=kappa, Hzz=np.eye(2), Www=W1)
    snap = effective_potential(gaussian_state(1).sample(g), m, 0.0)
    assert snap.scalar == pytest.approx(0.5 * kappa * 0.5, abs=1e-12)


def test_direct_quadrature_agrees_with_moments():
    g = Grid.uniform(1, -10.0, 10.0, 256)
    m = nonlocal_model()
    psi = gaussian_state(1, Q=0.2 + 1.5j, center=[0.3, 1.0]).sample(g)
    direct = direct_nonlocal_potential(psi, m, 0.0)
    xs = g.coords()
    reduced = effective_potential(psi, m, 0.0)(xs) - effective_potential(psi, m.replace(kappa=0.0), 0.0)(xs)
    assert np.abs(direct - reduced).max() < 1e-12


def test_unsupported_blocks():
    bad = QuadraticModel(n=1, Hzz=np.array([[1.0, 0.2], [0.2, 1.0]]))
    with pytest.raises(UnsupportedModelError, match="grid solver restriction"):
        check_grid_model(bad)
    bad = QuadraticModel(n=1, Hzz=np.eye(2), Wzz=np.array([[0.0, 0.1], [0.1, 0.0]]))
    with pytest.raises(UnsupportedModelError, match="Wzz"):
        split_step_evolve(gaussian_state(1).sample(Grid.uniform(1, -8, 8, 64)), bad, grid(0.01))


def test_step_size_heuristic():
    g = Grid.uniform(1, -20.0, 20.0, 512)
    with pytest.raises(StepSizeError):
        split_step_evolve(gaussian_state(1, Q=0.05j).sample(g), harmonic_model(), grid(1.0, 0.5))


def test_leakage_warning():
    g = Grid.uniform(1, -6.0, 6.0, 128)
    psi0 = gaussian_state(1, center=[3.0, 0.0]).sample(g)
    with pytest.warns(RuntimeWarning, match="leakage"):
        split_step_evolve(psi0, free_model(), grid(1.0, 1e-2))


def test_grid_restrictions():
    with pytest.raises(ValueError):
        Grid.uniform(1, -1.0, 1.0, 100)
    with pytest.raises(ValueError):
        Grid.uniform(1, -1.0, 1.0, 32)


def test_residual_of_assembled_solution():
    g = Grid.uniform(1, -16.0, 16.0, 1024)
    m = nonlocal_model()
    base = solve_cauchy(gaussian_state(1, Q=0.2 + 1.5j, center=[0.3, 1.0]), m, grid(2.0))
    assert residual_norm(base.samples(g, [999, 1000, 1001]), m).max() <= 1e-4


def test_frozen_gaussian_residual_large():
    g = Grid.uniform(1, -16.0, 16.0, 512)
    s = gaussian_state(1, Q=2j, center=[0.0, 1.0]).sample(g)
    frozen = [GridState(g, s.values, 1.0, t) for t in (0.0, 1e-3, 2e-3)]
    assert residual_norm(frozen, harmonic_model())[0] > 0.1


def test_zero_function_residual():
    g = Grid.uniform(1, -8.0, 8.0, 64)
    z = [GridState(g, np.zeros(64, complex), 1.0, t) for t in (0.0, 0.1, 0.2)]
    assert residual_norm(z, nonlocal_model())[0] == 0.0


def test_residual_needs_three():
    g = Grid.uniform(1, -8.0, 8.0, 64)
    s = gaussian_state(1).sample(g)
    with pytest.raises(ValueError):
        residual_norm([s, s], harmonic_model())


def test_compare_l2():
    g = Grid.uniform(1, -8.0, 8.0, 128)
    a = gaussian_state(1, Q=0.3 + 1j).sample(g)
    same = compare_l2(a, a)
    assert same["raw_l2"] == 0.0
    assert same["phase_aligned_l2"] == pytest.approx(0.0, abs=1e-15)
    assert same["best_phase"] == pytest.approx(0.0, abs=1e-15)
    b = a.with_values(np.exp(1j * np.pi / 3) * a.values)
    r = compare_l2(a, b)
    assert r["raw_l2"] == pytest.approx(2 * np.sin(np.pi / 6) * a.norm(), abs=1e-12)
    assert r["phase_aligned_l2"] < 1e-12
    assert r["best_phase"] == pytest.approx(np.pi / 3, abs=1e-12)
    with pytest.raises(ValueError, match="grid mismatch"):
        compare_l2(a, gaussian_state(1).sample(Grid.uniform(1, -8.0, 8.0, 64)))


def test_two_dimensional_run():
    g = Grid.uniform(2, -8.0, 8.0, 64)
    m = QuadraticModel(n=2, kappa=0.2, Hzz=np.diag([1.0, 1.0, 1.0, 2.0]),
                       Wzz=np.diag([0.0, 0.0, 1.0, 0.5]), Wzw=np.diag([0.0, 0.0, 0.5, 0.5]))
    s0 = gaussian_state(2, center=[0.2, 0.0, 0.5, -0.4])
    ts = grid(1.0, 1e-3)
    out = split_step_evolve(s0.sample(g), m, ts, save_every=1000)
    base = solve_cauchy(s0, m, ts)
    assert compare_l2(base.sample(g, -1), out[-1])["raw_l2"] < 1e-5
