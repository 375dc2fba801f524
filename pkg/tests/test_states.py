import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quadgpe import (Grid, GridState, HermiteGaussianState, PhaseSpaceOperator, Poly, WeylPolySymbol,
                     apply_weyl_grid, gaussian_state)

GRID = Grid.uniform(1, -14.0, 14.0, 1024)


def sym(terms, n=1, **kw):
    return WeylPolySymbol.from_terms(n, terms, **kw)


def test_poly_arithmetic_and_eval():
    p = Poly.from_terms(2, {(1, 0): 2.0, (0, 2): 1j})
    q = Poly.linear([1.0, -1.0], const=0.5)
    y = (0.3, -1.2)
    assert (p * q)(*y) == pytest.approx(p(*y) * q(*y))
    assert (p + q)(*y) == pytest.approx(p(*y) + q(*y))
    assert p.deriv(1)(*y) == pytest.approx(2j * y[1])
    assert p.degree == 2 and (p * q).degree == 3


def test_poly_substitution():
    p = Poly.from_terms(2, {(2, 0): 1.0, (1, 1): 3.0})
    L = np.array([[1.0, 2.0], [0.5, -1.0]])
    s = np.array([0.1, 0.2])
    y = np.array([0.7, -0.4])
    w = L @ y + s
    assert p.substitute_linear(L, s)(*y) == pytest.approx(p(*w))


def test_degree_overflow():
    with pytest.raises(ValueError, match="degree overflow"):
        sym({(0, 5): 1.0})
    with pytest.raises(ValueError, match="degree overflow"):
        sym({(2, 1): 1.0}, max_degree=2)


def test_symbol_transport_linear():
    c = np.array([0.4, -1.3])
    L = np.array([[2.0, 1.0], [1.0, 1.0]])
    a = WeylPolySymbol.linear(c)
    A = a.transported(L)
    expect = WeylPolySymbol.linear(np.linalg.inv(L).T @ c)
    assert A.allclose(expect)


def test_symbol_transport_harmonic_quarter_turn():
    R = np.array([[0.0, -1.0], [1.0, 0.0]])
    A = sym({(0, 1): 1.0}).transported(R)
    assert A.allclose(sym({(1, 0): -1.0}))


def test_symbol_identity_transport():
    a = sym({(2, 1): 0.5, (0, 1): 1j, (0, 0): 2.0})
    assert a.transported(np.eye(2)).allclose(a)


def test_apply_one_is_identity():
    s = gaussian_state(1, Q=0.3 + 1.1j, center=[0.2, 0.4])
    out = s.apply_weyl(WeylPolySymbol.one(1))
    assert np.allclose(out.sample(GRID).values, s.sample(GRID).values)


def test_apply_x_on_ground():
    s = gaussian_state(1)
    out = s.apply_weyl(sym({(0, 1): 1.0}))
    x = np.linspace(-3, 3, 7)
    assert np.allclose(out(x), x * s(x))
    assert out.norm2() == pytest.approx(0.5)


def test_apply_px_weyl_symmetrized():
    s = gaussian_state(1, normalize=False)
    out = s.apply_weyl(sym({(1, 1): 1.0}))
    expected = Poly.from_terms(1, {(2,): 1j, (0,): -0.5j})
    assert out.poly.allclose(expected)
    psi = s.sample(GRID)
    assert np.abs(apply_weyl_grid(sym({(1, 1): 1.0}), psi) - out.sample(GRID).values).max() <= 1e-8


@pytest.mark.parametrize("terms", [
    {(2, 0): 1.0}, {(1, 1): 1.0}, {(2, 1): 1.0}, {(1, 2): 1.0 + 1j}, {(2, 2): 0.5}, {(3, 1): 1.0},
    {(0, 3): 1.0, (1, 0): -2.0},
])
def test_weyl_action_matches_grid(terms):
    s = gaussian_state(1, hbar=0.7, Q=0.4 + 1.3j, center=[0.5, -0.3],
                       poly=Poly.from_terms(1, {(1,): 1.0, (0,): 0.2j}))
    a = sym(terms)
    psi = s.sample(GRID)
    psi = GridState(GRID, psi.values, 0.7)
    ref = apply_weyl_grid(a, psi)
    got = s.apply_weyl(a).sample(GRID).values
    assert np.abs(ref - got).max() <= 1e-8 * max(1.0, np.abs(ref).max())


def test_displacement_action():
    s = gaussian_state(1, Q=0.3 + 1.2j, center=[0.1, -0.2])
    d = np.array([0.4, 1.1])
    out = PhaseSpaceOperator.displacement(d, 1.0).apply(s)
    (x,) = GRID.coords()
    expect = np.exp(1j * (d[0] * x - 0.5 * d[0] * d[1])) * s(x - d[1])
    assert np.abs(out(x) - expect).max() < 1e-13


def test_conjugation_is_shifted_symbol():
    a = PhaseSpaceOperator.polynomial(sym({(1, 1): 1.0, (0, 2): 0.5}), 1.0)
    c = np.array([0.3, -0.8])
    T = PhaseSpaceOperator.displacement(c, 1.0)
    Tinv = PhaseSpaceOperator.displacement(-c, 1.0)
    s = gaussian_state(1, Q=0.2 + 1.1j)
    lhs = Tinv.apply(a.apply(T.apply(s)))
    rhs = a.conjugated(c).apply(s)
    (x,) = GRID.coords()
    assert np.abs(lhs(x) - rhs(x)).max() < 1e-12


def test_non_normalizable_rejected():
    with pytest.raises(ValueError, match="non-normalizable"):
        HermiteGaussianState(1, 1.0, 1.0, np.zeros(1), np.zeros(1), np.array([[0.5 + 0j]]))


def test_frame_round_trip():
    s = gaussian_state(1, Q=0.2 + 1.5j, center=[0.3, 1.0])
    Z = np.array([0.3, 1.0])
    back = s.to_frame(Z).from_frame(Z)
    (x,) = GRID.coords()
    assert np.abs(back(x) - s(x)).max() < 1e-14


def test_closed_form_norm_matches_grid():
    s = gaussian_state(2, Q=np.array([[1j, 0.2], [0.2, 0.5 + 2j]]), center=[0.1, 0.2, -0.3, 0.4],
                       poly=Poly.from_terms(2, {(1, 1): 1.0, (0, 0): 0.3}), normalize=False)
    g = Grid.uniform(2, -10.0, 10.0, 128)
    assert s.norm2() == pytest.approx(s.sample(g).norm2(), rel=1e-10)


small = st.floats(-1.5, 1.5)


@settings(max_examples=30, deadline=None)
@given(small, small, small, small, small, small)
def test_displacement_composition(a1, a2, b1, b2, x1, x2):
    a, b = np.array([a1, a2]), np.array([b1, b2])
    s = gaussian_state(1, center=[x1, x2])
    Ta, Tb = (PhaseSpaceOperator.displacement(v, 1.0) for v in (a, b))
    lhs = Ta.apply(Tb.apply(s))
    J = np.array([[0.0, -1.0], [1.0, 0.0]])
    rhs = PhaseSpaceOperator.displacement(a + b, 1.0).apply(s).scaled(np.exp(-0.5j * a @ J @ b))
    (x,) = GRID.coords()
    assert np.abs(lhs(x) - rhs(x)).max() < 1e-12


@settings(max_examples=30, deadline=None)
@given(st.lists(small, min_size=4, max_size=4), st.floats(0, 6.0))
def test_transport_composes(coeffs, t):
    a = sym({(1, 0): coeffs[0], (0, 1): coeffs[1], (1, 1): coeffs[2], (0, 2): coeffs[3]})
    c, s = np.cos(t), np.sin(t)
    R1 = np.array([[c, -s], [s, c]])
    R2 = np.array([[1.0, 0.0], [0.7, 1.0]])
    assert a.transported(R1).transported(R2).allclose(a.transported(R2 @ R1), atol=1e-10)
