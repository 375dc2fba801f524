"""Nonlinear solutions from linear ones, and the two symmetry-operator routes.

A solution of the nonlocal equation is written as

    Psi(x, t) = exp{(i/hbar)[S(t) + <P(t), x - X(t)>]} phi(x - X(t), t)

with ``(P, X) = Z(t)`` from the Hamilton-Ehrenfest system and ``phi`` a
centred solution of the associated linear equation.  Each branch (base or
transformed) carries its own trajectory bundle; comparisons between branches
happen on the assembled ``Psi``.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .ehrenfest_flow import (TrajectoryBundle, check_times, evolve, evolve_auxiliary_cauchy,
                             lambda_flow)
from .grid import Grid, GridState
from .linear_propagator import AnnihilationError, normalization_constant, propagate_gaussian
from .moments import gaussian_moments
from .phase_space import QuadraticModel
from .states import HermiteGaussianState, PhaseSpaceOperator, WeylPolySymbol

__all__ = [
    "SolutionAssembly",
    "InadmissibleOperatorError",
    "solve_cauchy",
    "assemble_solution",
    "centering_check",
    "frame_operator",
    "symmetry_route1",
    "symmetry_route2",
    "norm_and_moment_report",
]


class InadmissibleOperatorError(ValueError):
    pass


class _Lazy(Sequence):
    """Cached sequence ``k -> fn(k)`` of fixed length."""

    def __init__(self, fn: Callable[[int], object], length: int):
        self._fn = fn
        self._len = length
        self._cache = {}

    def __len__(self):
        return self._len

    def __getitem__(self, k):
        if isinstance(k, slice):
            return [self[i] for i in range(*k.indices(self._len))]
        k = range(self._len)[k]
        if k not in self._cache:
            self._cache[k] = self._fn(k)
        return self._cache[k]


@dataclass(frozen=True, eq=False)
class SolutionAssembly:
    """A branch: trajectory bundle plus centred u-frame states on the same grid."""

    bundle: TrajectoryBundle
    phi: Sequence
    provenance: str = "base"
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.phi) != self.bundle.times.size:
            raise ValueError("phi and bundle must share the time grid")

    @property
    def times(self):
        return self.bundle.times

    def psi(self, k: int) -> HermiteGaussianState:
        """The assembled solution at knot ``k`` (still a Gaussian-class state)."""
        b = self.bundle
        return self.phi[k].from_frame(b.Z[k], b.S[k])

    def __call__(self, k: int, *xs):
        return self.psi(k)(*xs)

    def sample(self, grid: Grid, k: int) -> GridState:
        return self.psi(k).sample(grid, t=float(self.times[k]))

    def samples(self, grid: Grid, ks) -> list:
        return [self.sample(grid, k) for k in ks]


def _as_operator(a, n, hbar) -> PhaseSpaceOperator:
    if isinstance(a, PhaseSpaceOperator):
        if a.n != n:
            raise InadmissibleOperatorError("operator dimension mismatch")
        return a
    if isinstance(a, WeylPolySymbol):
        return PhaseSpaceOperator.polynomial(a, hbar)
    raise InadmissibleOperatorError(
        f"inadmissible symbol kind {type(a).__name__}: use a polynomial or displacement"
    )


def solve_cauchy(gamma: HermiteGaussianState, m: QuadraticModel, times) -> SolutionAssembly:
    """Base branch for Cauchy data ``gamma`` (moments taken from ``gamma`` itself)."""
    times = check_times(times)
    mo = gaussian_moments(gamma)
    bundle = evolve(mo.Z, mo.Delta2, m, times)
    phi0 = gamma.to_frame(mo.Z)
    return assemble_solution(_propagate(phi0, m, bundle), bundle, "base")


def _propagate(phi0, m, bundle):
    from .ehrenfest_flow import metaplectic_flow
    return propagate_gaussian(phi0, m, bundle.times, flow=metaplectic_flow(m, bundle.times))


def assemble_solution(phi, bundle: TrajectoryBundle, provenance: str = "base",
                      info: dict | None = None) -> SolutionAssembly:
    """Pair u-frame states with a trajectory bundle; ``Psi`` is built on access."""
    if len(phi) != bundle.times.size:
        raise ValueError("grid mismatch between phi and bundle")
    return SolutionAssembly(bundle, phi, provenance, dict(info or {}))


def first_moments(phi, stride: int = 1) -> np.ndarray:
    return np.array([gaussian_moments(phi[k]).Z for k in range(0, len(phi), stride)])


def centering_check(phi, stride: int = 1) -> float:
    """``max_t |<phi(t)| z_u |phi(t)>|`` (one state or a sequence)."""
    if isinstance(phi, HermiteGaussianState):
        phi = [phi]
    return float(np.abs(first_moments(phi, stride)).max())


def frame_operator(a, Z) -> PhaseSpaceOperator:
    """``a`` seen from the frame centred at ``Z``: ``T(Z)^+ a T(Z)``."""
    return a.conjugated(Z)


def symmetry_route1(base: SolutionAssembly, a, m: QuadraticModel,
                    phase: str = "linear") -> SolutionAssembly:
    """Transformed solution through the recentred linear symmetry.

    Steps: the u-frame operator ``A(t)`` (transport of ``a`` seen from
    ``Z(0)``) maps ``phi(t)`` to ``phibar_A(t) / alpha``; its mean ``lam(t)``
    is removed by the shift flow and phase ``S_lam``; the result is placed on
    the transformed trajectory started at ``Z(0) + lam(0)``.

    ``phase`` selects the recentring phase: ``"linear"`` (default) keeps the
    recentred state a solution of the linear equation; ``"literal"`` follows
    the printed ``exp{(i/hbar)[S_lam + <lam_p, u + lam_u>]}`` with the
    mean-field Hamiltonian in ``S_lam``.
    """
    b = base.bundle
    n, hbar = m.n, m.hbar
    a = _as_operator(a, n, hbar)
    a_u = frame_operator(a, b.Z[0])
    phi0 = base.phi[0]
    alpha = normalization_constant(a_u, phi0)
    bar0 = a_u.apply(phi0).scaled(1.0 / alpha)
    mo = gaussian_moments(bar0)
    lam0 = mo.Z
    if phase == "linear":
        S0 = -float(b.Z[0][:n] @ lam0[n:])
        lam = lambda_flow(lam0, m, b.times, S0=S0)
    elif phase == "literal":
        lam = lambda_flow(lam0, m, b.times, Delta2=b.Delta2, phase="mean-field")
    else:
        raise ValueError(f"unknown phase convention {phase!r}")
    branch = evolve_auxiliary_cauchy(b.Z[0] + lam0, mo.Delta2, m, b.times)

    def phi_A(k):
        A_t = a_u.transported(b.Lambda[k])
        bar = A_t.apply(base.phi[k]).scaled(1.0 / alpha)
        lk, S = lam.lam[k], lam.S_lambda[k]
        if phase == "linear":
            return bar.to_frame(lk).scaled(np.exp(-1j * S / hbar))
        flipped = np.concatenate([-lk[:n], lk[n:]])
        return bar.to_frame(flipped).scaled(np.exp(1j * (S + lk[:n] @ lk[n:]) / hbar))

    info = {"alpha": alpha, "lambda": lam, "operator": a, "u_operator": a_u}
    return assemble_solution(_Lazy(phi_A, b.times.size), branch, "route1", info)


def symmetry_route2(gamma: HermiteGaussianState, a, m: QuadraticModel, times,
                    base: SolutionAssembly | None = None) -> SolutionAssembly:
    """Transformed solution through the auxiliary Cauchy problem for ``a gamma``.

    The u-frame operator ``abar`` relating the two initial u-frame states is
    the conjugation of ``a`` by both frame changes; it is transported along
    the linear flow and applied to the base linear solution.
    """
    times = check_times(times)
    n, hbar = m.n, m.hbar
    a = _as_operator(a, n, hbar)
    if base is None:
        base = solve_cauchy(gamma, m, times)
    Z0 = base.bundle.Z[0]
    raw = a.apply(gamma)
    alpha = raw.norm()
    if not alpha > 1e-12 * max(1.0, gamma.norm()):
        raise AnnihilationError("operator annihilates initial data")
    gamma_A = raw.scaled(1.0 / alpha)
    mo = gaussian_moments(gamma_A)
    ZA0 = mo.Z
    phase = 0.5 / hbar * (ZA0[:n] @ ZA0[n:] - Z0[:n] @ Z0[n:])
    abar = frame_operator(a, Z0).left_displaced(Z0).left_displaced(-ZA0)
    abar = abar.scaled(np.exp(1j * phase) / alpha)
    branch = evolve_auxiliary_cauchy(ZA0, mo.Delta2, m, times)
    L = base.bundle.Lambda

    def phi_A(k):
        return abar.transported(L[k]).apply(base.phi[k])

    info = {"alpha": alpha, "operator": a, "u_operator": abar, "gamma_A": gamma_A}
    return assemble_solution(_Lazy(phi_A, times.size), branch, "route2", info)


def norm_and_moment_report(assembly: SolutionAssembly, stride: int = 1) -> dict:
    """Per-time norm, first/second moments of ``Psi`` and their deviations from the bundle."""
    b = assembly.bundle
    ks = list(range(0, b.times.size, stride))
    if ks[-1] != b.times.size - 1:
        ks.append(b.times.size - 1)
    norms, Zs, dZ, dD, cen = [], [], [], [], []
    for k in ks:
        psi = assembly.psi(k)
        mo = gaussian_moments(psi)
        norms.append(psi.norm())
        Zs.append(mo.Z)
        dZ.append(np.abs(mo.Z - b.Z[k]).max())
        dD.append(np.abs(mo.Delta2 - b.Delta2[k]).max())
        cen.append(np.abs(gaussian_moments(assembly.phi[k]).Z).max())
    return {
        "times": b.times[ks],
        "norm": np.array(norms),
        "Z": np.array(Zs),
        "moment_deviation": np.array(dZ),
        "covariance_deviation": np.array(dD),
        "centering": np.array(cen),
    }
