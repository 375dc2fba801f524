"""First and symmetrised centred second phase-space moments."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .grid import GridState
from .states import HermiteGaussianState

__all__ = [
    "MomentSet",
    "first_moment",
    "centered_second_moments",
    "grid_moments",
    "gaussian_moments",
    "BOUNDARY_MASS_TOL",
]

BOUNDARY_MASS_TOL = 1e-10


@dataclass(frozen=True)
class MomentSet:
    Z: np.ndarray
    Delta2: np.ndarray


def _check(psi: GridState):
    n2 = psi.norm2()
    if not n2 > 0:
        raise ValueError("zero-norm wavefunction has no moments")
    leak = psi.boundary_mass()
    if leak > BOUNDARY_MASS_TOL:
        warnings.warn(f"grid does not resolve state: boundary mass {leak:.2e}", RuntimeWarning,
                      stacklevel=3)
    return n2


def first_moment(psi: GridState, hbar: float | None = None) -> np.ndarray:
    """``<psi| z |psi> / <psi|psi>`` with momenta from spectral differentiation."""
    if hbar is not None and hbar != psi.hbar:
        psi = GridState(psi.grid, psi.values, hbar, psi.t)
    n2 = _check(psi)
    n = psi.n_dim
    zf = [psi.p(j) for j in range(n)] + [psi.x(j) for j in range(n)]
    return np.array([psi.inner(psi.with_values(f)).real for f in zf]) / n2


def centered_second_moments(psi: GridState, hbar: float | None = None, Z=None) -> np.ndarray:
    """``1/2 <{dz_j, dz_k}>`` with ``dz = z - Z``; ``Z`` defaults to the first moment."""
    if hbar is not None and hbar != psi.hbar:
        psi = GridState(psi.grid, psi.values, hbar, psi.t)
    if Z is None:
        Z = first_moment(psi)
    n2 = _check(psi)
    n = psi.n_dim
    f = psi.values
    dz = [psi.p(j) - Z[j] * f for j in range(n)] + [psi.x(j) - Z[n + j] * f for j in range(n)]
    w = psi.grid.cell
    G = np.array([[np.sum(np.conj(a) * b) * w for b in dz] for a in dz])
    D = G.real / n2
    return 0.5 * (D + D.T)


def grid_moments(psi: GridState) -> MomentSet:
    Z = first_moment(psi)
    return MomentSet(Z, centered_second_moments(psi, Z=Z))


def gaussian_moments(state: HermiteGaussianState) -> MomentSet:
    """Exact moments of a polynomial x Gaussian state (closed-form Gaussian integrals)."""
    n = state.n
    n2 = state.norm2()
    if not n2 > 0:
        raise ValueError("zero-norm state has no moments")
    ops = [state.p_op(j) for j in range(n)] + [state.x_op(j) for j in range(n)]
    Z = np.array([state.inner(o).real for o in ops]) / n2
    d = [HermiteGaussianState(n, state.hbar, 1.0, state.q, state.p, state.Q,
                              o.poly * o.N - Z[j] * (state.poly * state.N))
         for j, o in enumerate(ops)]
    G = np.array([[a.inner(b) for b in d] for a in d])
    D = G.real / n2
    return MomentSet(Z, 0.5 * (D + D.T))
