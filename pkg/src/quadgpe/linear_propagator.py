"""Exact propagation for the associated linear equation and symbol transport.

For a quadratic generator ``1/2 <z, M(t) z>`` the evolution of the
polynomial x Gaussian class is fixed by the classical flow ``Lambda``:
the width follows the Moebius map ``Q -> (L1 Q + L2)(L3 Q + L4)^-1``, the
amplitude picks up ``det(L3 Q + L4)^(-1/2)`` and the prefactor polynomial is
re-expressed through the Heisenberg-evolved position operators.
"""

from __future__ import annotations

import warnings
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .ehrenfest_flow import check_times, metaplectic_flow
from .grid import Grid, GridState, apply_quadratic_grid, apply_weyl_grid
from .phase_space import QuadraticModel, effective_linear_matrix, symplectic_form
from .states import HermiteGaussianState, PhaseSpaceOperator, Poly, WeylPolySymbol

__all__ = [
    "GaussianPropagation",
    "propagate_gaussian",
    "transport_symbol",
    "apply_symbol",
    "normalization_constant",
    "kommut_residual",
    "AnnihilationError",
]


class AnnihilationError(ValueError):
    """The operator maps the initial data to zero."""


def _sqrt_branch(detC):
    """Continuous square root of ``det C`` along the grid and its sign-change count."""
    principal = np.sqrt(detC.astype(complex))
    out = principal.copy()
    sign = 1.0
    flips = 0
    for k in range(1, out.size):
        cand = sign * principal[k]
        if abs(cand - out[k - 1]) > abs(cand + out[k - 1]):
            sign = -sign
            cand = -cand
            flips += 1
        out[k] = cand
    return out, flips


@dataclass(frozen=True, eq=False)
class GaussianPropagation(Sequence):
    """States of one propagated packet on a time grid, built on demand."""

    state0: HermiteGaussianState
    times: np.ndarray
    Lambda: np.ndarray
    Theta: np.ndarray
    sqrt_det: np.ndarray
    maslov: int

    def __len__(self):
        return self.times.size

    def __getitem__(self, k):
        if isinstance(k, slice):
            return [self[i] for i in range(*k.indices(len(self)))]
        k = range(len(self))[k]
        return self._state(k)

    def at(self, t):
        return self[int(np.argmin(np.abs(self.times - t)))]

    def _state(self, k):
        s0 = self.state0
        n = s0.n
        L = self.Lambda[k]
        L1, L2, L3, L4 = L[:n, :n], L[:n, n:], L[n:, :n], L[n:, n:]
        C = L3 @ s0.Q + L4
        Q = (L1 @ s0.Q + L2) @ np.linalg.inv(C)
        Q = 0.5 * (Q + Q.T)
        zc0 = s0.center
        zc = L @ zc0
        theta = zc0 @ self.Theta[k] @ zc0
        N = s0.N / self.sqrt_det[k] * np.exp(1j * theta / s0.hbar)
        env = HermiteGaussianState(n, s0.hbar, N, zc[n:], zc[:n], Q)
        if s0.poly.degree == 0:
            return HermiteGaussianState(n, s0.hbar, N, zc[n:], zc[:n], Q, s0.poly)
        J = symplectic_form(n)
        B = (-J @ L.T @ J)[n:, :]
        return env._with_poly(_evaluate_in_operators(s0.poly, B, env))


def _evaluate_in_operators(f0: Poly, B, env: HermiteGaussianState) -> Poly:
    """``f0(L_1..L_n) 1`` with commuting ``L_j = B_j . (z - z_c)`` on ``env``."""
    n = env.n
    cache = {(0,) * n: Poly.constant(n)}

    def L(j, f):
        out = Poly.constant(n, 0.0)
        for k in range(n):
            if B[j, k] != 0:
                out = out + B[j, k] * (env._p(f, k) - env.p[k] * f)
            if B[j, n + k] != 0:
                out = out + B[j, n + k] * f.mul_var(k)
        return out

    def mono(alpha):
        if alpha in cache:
            return cache[alpha]
        j = next(i for i in range(n) if alpha[i] > 0)
        prev = list(alpha)
        prev[j] -= 1
        val = L(j, mono(tuple(prev)))
        cache[alpha] = val
        return val

    out = Poly.constant(n, 0.0)
    for k, v in f0.terms():
        out = out + v * mono(k)
    return out.trimmed()


def propagate_gaussian(state0: HermiteGaussianState, m: QuadraticModel, times,
                       flow=None) -> GaussianPropagation:
    """Solve ``i hbar phi_t = 1/2 <z, (Hzz + kt Wzz) z> phi`` exactly on the Gaussian class.

    ``flow`` may pass a precomputed ``(Lambda, Theta)`` pair from
    :func:`~quadgpe.ehrenfest_flow.metaplectic_flow` on the same grid.
    """
    times = check_times(times)
    if state0.n != m.n:
        raise ValueError("state and model dimensions differ")
    Lambda, Theta = metaplectic_flow(m, times) if flow is None else flow
    n = m.n
    C = Lambda[:, n:, :n] @ state0.Q + Lambda[:, n:, n:]
    detC = np.linalg.det(C)
    if np.any(np.abs(detC) < 1e-300):
        raise FloatingPointError("caustic: det(L3 Q + L4) vanished")
    dphase = np.abs(np.angle(detC[1:] / detC[:-1]))
    if dphase.size and dphase.max() > np.pi / 2:
        warnings.warn("time step too coarse to track the square-root branch", RuntimeWarning)
    s, flips = _sqrt_branch(detC)
    return GaussianPropagation(state0, times, Lambda, Theta, s, flips)


def transport_symbol(a, Lambda):
    """Carry a symbol (or displaced-polynomial operator) along the flow stack."""
    Lambda = np.asarray(Lambda)
    if Lambda.ndim == 2:
        return a.transported(Lambda)
    return [a.transported(L) for L in Lambda]


def apply_symbol(A, state: HermiteGaussianState) -> HermiteGaussianState:
    if isinstance(A, WeylPolySymbol):
        return state.apply_weyl(A)
    return A.apply(state)


def normalization_constant(a, state0: HermiteGaussianState) -> float:
    """``|| a state0 ||``; raises :class:`AnnihilationError` if it vanishes."""
    out = apply_symbol(a, state0)
    nrm = out.norm()
    if not nrm > 1e-12 * max(1.0, state0.norm()):
        raise AnnihilationError("operator annihilates initial data")
    return nrm


def _symbol_rate(syms, coeffs, times, k):
    """Five-point central difference on uniform stretches, three-point otherwise."""
    h = np.diff(times)
    lo, hi = k - 2, k + 2
    if lo >= 0 and hi < times.size and np.ptp(h[lo:hi]) <= 1e-12 * h[k]:
        w = {-2: 1.0, -1: -8.0, 1: 8.0, 2: -1.0}
        out = None
        for j, c in w.items():
            term = syms[k + j] * (coeffs[k + j] * c / (12.0 * h[k]))
            out = term if out is None else out + term
        return out
    dt = times[k + 1] - times[k - 1]
    return (syms[k + 1] * coeffs[k + 1] - syms[k - 1] * coeffs[k - 1]) * (1.0 / dt)


def kommut_residual(symbols, times, m: QuadraticModel, probes, grid: Grid,
                    stride: int = 1) -> float:
    """Grid check of ``[-i hbar d/dt + 1/2 <z, M z>, A(t)] = 0``.

    ``symbols`` are polynomial symbols on ``times``; the time derivative is a
    fourth-order central difference where the grid is locally uniform.  Returns the largest ``||residual phi|| / ||phi||``
    over probes and interior times (every ``stride``-th knot).
    """
    times = check_times(times)
    if len(symbols) != times.size or times.size < 3:
        raise ValueError("need one symbol per time knot and at least three knots")
    syms = [s.symbol if isinstance(s, PhaseSpaceOperator) else s for s in symbols]
    for s in symbols:
        if isinstance(s, PhaseSpaceOperator) and not s.is_polynomial:
            raise ValueError("commutator residual needs polynomial symbols")
    coeffs = [s.coeff if isinstance(s, PhaseSpaceOperator) else 1.0 for s in symbols]
    hbar = m.hbar
    worst = 0.0
    samples = [p.sample(grid) if isinstance(p, HermiteGaussianState) else p for p in probes]
    edge = 2 if times.size >= 5 else 1
    for k in range(edge, times.size - edge, stride):
        M = effective_linear_matrix(m, times[k])
        dA = _symbol_rate(syms, coeffs, times, k)
        A = syms[k] * coeffs[k]
        for psi in samples:
            psi = GridState(psi.grid, psi.values, hbar)
            Aphi = apply_weyl_grid(A, psi)
            HAphi = apply_quadratic_grid(M, None, psi, Aphi)
            Hphi = apply_quadratic_grid(M, None, psi)
            AHphi = apply_weyl_grid(A, psi.with_values(Hphi))
            r = -1j * hbar * apply_weyl_grid(dA, psi) + HAphi - AHphi
            res = np.sqrt(np.sum(np.abs(r) ** 2) * grid.cell) / psi.norm()
            worst = max(worst, float(res))
    return worst
