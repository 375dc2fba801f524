"""Grid mean-field solver for the nonlocal equation and a residual checker.

The nonlocal term ``kappa * int dy psi*(y) V(z, w) psi(y)`` of a quadratic
kernel contracts to moments of ``psi``, so every sub-step of the Strang
splitting evaluates it exactly from the current field.  Kinetic sub-steps
leave momentum moments unchanged and potential sub-steps leave position
moments unchanged, which keeps each sub-flow exact for its frozen
coefficients.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .grid import Grid, GridState, apply_quadratic_grid
from .phase_space import QuadraticModel

__all__ = [
    "UnsupportedModelError",
    "StepSizeError",
    "EffectivePotentialSnapshot",
    "check_grid_model",
    "effective_potential",
    "direct_nonlocal_potential",
    "split_step_evolve",
    "residual_norm",
    "compare_l2",
    "LEAKAGE_TOL",
]

LEAKAGE_TOL = 1e-8


class UnsupportedModelError(ValueError):
    """Model uses blocks the split-step solver cannot separate."""


class StepSizeError(ValueError):
    pass


@dataclass(frozen=True)
class EffectivePotentialSnapshot:
    """``V(x) = <x, quadratic x> + <linear, x> + scalar`` at one instant."""

    quadratic: np.ndarray
    linear: np.ndarray
    scalar: float

    def __call__(self, xs):
        n = len(xs)
        out = self.scalar + sum(self.linear[j] * xs[j] for j in range(n))
        for j in range(n):
            for k in range(n):
                if self.quadratic[j, k] != 0:
                    out = out + self.quadratic[j, k] * xs[j] * xs[k]
        return out


def check_grid_model(m: QuadraticModel, times=None) -> None:
    """Raise :class:`UnsupportedModelError` if any block couples p and x."""
    n = m.n
    ts = np.zeros(1) if times is None else np.asarray(times, dtype=float)
    ts = np.unique(np.concatenate([ts[:1], ts[-1:], ts[:: max(1, ts.size // 16)]]))
    c = m.coefficients(ts)
    for name in ("Hzz", "Wzz", "Wzw", "Www"):
        v = c[name]
        if np.any(v[:, :n, n:] != 0) or np.any(v[:, n:, :n] != 0):
            raise UnsupportedModelError(
                f"grid solver restriction: {name} has p-x cross block"
            )


def _raw_x_moments(psi: GridState):
    rho = np.abs(psi.values) ** 2 * psi.grid.cell
    xs = psi.grid.coords()
    mass = rho.sum()
    first = np.array([np.sum(rho * x) for x in xs])
    second = np.array([[np.sum(rho * a * b) for b in xs] for a in xs])
    return mass, first, second


def _raw_p_moments(psi_hat, psi: GridState):
    w = np.abs(psi_hat) ** 2 * psi.grid.cell / psi_hat.size
    ps = [psi.hbar * k for k in psi.grid.wavenumbers()]
    mass = w.sum()
    first = np.array([np.sum(w * p) for p in ps])
    second = np.array([[np.sum(w * a * b) for b in ps] for a in ps])
    return mass, first, second


def _block_terms(c, m, sl, mass, first, second):
    kap = m.kappa
    K = 0.5 * (c["Hzz"][sl, sl] + kap * mass * c["Wzz"][sl, sl])
    b = c["Hz"][sl] + kap * c["Wzw"][sl, sl] @ first
    s = 0.5 * kap * np.trace(c["Www"][sl, sl] @ second)
    return K, b, float(s)


def effective_potential(psi: GridState, m: QuadraticModel, t: float) -> EffectivePotentialSnapshot:
    """Position-space part of ``H + kappa V(t, psi)`` from the instantaneous field.

    Uses raw (unnormalised) integrals over ``|psi|^2``, so ``kappa`` times the
    mass plays the role of ``kappa_tilde``.
    """
    check_grid_model(m, [t])
    c = {k: v[0] for k, v in m.coefficients([t]).items()}
    n = m.n
    K, b, s = _block_terms(c, m, slice(n, 2 * n), *_raw_x_moments(psi))
    return EffectivePotentialSnapshot(K, b, s)


def _kinetic_terms(psi_hat, psi, m, c):
    n = m.n
    return _block_terms(c, m, slice(0, n), *_raw_p_moments(psi_hat, psi))


def direct_nonlocal_potential(psi: GridState, m: QuadraticModel, t: float) -> np.ndarray:
    """``kappa int |psi(y)|^2 V(x, y) dy`` by O(N^2) quadrature (position blocks only)."""
    check_grid_model(m, [t])
    n = m.n
    npts = int(np.prod(psi.grid.N))
    if npts > 4096:
        raise ValueError("direct quadrature limited to 4096 grid points")
    if np.any(m.coefficients([t])["Wzz"][0][:n, :n]) or \
            np.any(m.coefficients([t])["Wzw"][0][:n, :n]) or \
            np.any(m.coefficients([t])["Www"][0][:n, :n]):
        raise UnsupportedModelError("direct quadrature supports position blocks only")
    c = {k: v[0][n:, n:] for k, v in m.coefficients([t]).items() if k != "Hz"}
    X = np.stack([x.ravel() for x in psi.grid.coords()], axis=1)
    rho = (np.abs(psi.values) ** 2).ravel() * psi.grid.cell
    qz = 0.5 * np.einsum("ai,ij,aj->a", X, c["Wzz"], X)
    qw = 0.5 * np.einsum("ai,ij,aj->a", X, c["Www"], X)
    kernel = qz[:, None] + X @ c["Wzw"] @ X.T + qw[None, :]
    return (m.kappa * kernel @ rho).reshape(psi.grid.shape)


def _support_phase(V, psi, dt):
    rho = np.abs(psi.values) ** 2
    sup = rho > 1e-10 * rho.max()
    if not sup.any():
        return 0.0
    v = V[sup]
    return float(dt * (v.max() - v.min()) / psi.hbar)


def split_step_evolve(gamma: GridState, m: QuadraticModel, times, save_every: int = 1,
                      strict: bool = True):
    """Strang-split evolution of ``i hbar psi_t = (H + kappa V(t, psi)) psi``.

    Returns the states at every ``save_every``-th knot of ``times`` (the last
    knot is always kept).  No renormalisation is applied.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size < 1 or np.any(np.diff(times) <= 0):
        raise ValueError("time grid must be strictly increasing")
    if gamma.n_dim != m.n:
        raise ValueError("grid dimension differs from model dimension")
    check_grid_model(m, times)
    n = m.n
    hbar = gamma.hbar
    grid = gamma.grid
    xs = grid.coords()
    ps = [hbar * k for k in grid.wavenumbers()]
    psi = gamma.values.copy()
    out = [GridState(grid, psi, hbar, times[0])]
    mids = times[:-1] + 0.5 * np.diff(times)
    coeffs = m.coefficients(mids) if mids.size else None
    leak_warned = False

    def kin_phase(K, b, s):
        T = s + sum(b[j] * ps[j] for j in range(n))
        for j in range(n):
            for k in range(n):
                if K[j, k] != 0:
                    T = T + K[j, k] * ps[j] * ps[k]
        return T

    for i in range(times.size - 1):
        h = times[i + 1] - times[i]
        c = {k: v[i] for k, v in coeffs.items()}
        psi_hat = np.fft.fftn(psi)
        T = kin_phase(*_kinetic_terms(psi_hat, gamma, m, c))
        psi = np.fft.ifftn(np.exp(-0.5j * h / hbar * T) * psi_hat)
        cur = GridState(grid, psi, hbar)
        K, b, s = _block_terms(c, m, slice(n, 2 * n), *_raw_x_moments(cur))
        V = EffectivePotentialSnapshot(K, b, s)(xs)
        if i == 0 and strict and _support_phase(V, cur, h) >= np.pi / 4:
            raise StepSizeError(
                f"dt={h:g} too large: potential phase spread {_support_phase(V, cur, h):.3g} rad per step"
            )
        psi = np.exp(-1j * h / hbar * V) * psi
        psi_hat = np.fft.fftn(psi)
        T = kin_phase(*_kinetic_terms(psi_hat, gamma, m, c))
        psi = np.fft.ifftn(np.exp(-0.5j * h / hbar * T) * psi_hat)
        if (i + 1) % save_every == 0 or i + 1 == times.size - 1:
            snap = GridState(grid, psi, hbar, times[i + 1])
            out.append(snap)
            leak = snap.boundary_mass()
            if not leak_warned and leak > LEAKAGE_TOL:
                warnings.warn(f"leakage: boundary mass {leak:.2e} at t={times[i + 1]:g}",
                              RuntimeWarning)
                leak_warned = True
    return out


def _apply_effective_hamiltonian(psi: GridState, m: QuadraticModel, t: float) -> np.ndarray:
    c = {k: v[0] for k, v in m.coefficients([t]).items()}
    n = m.n
    f = psi.values
    mass = psi.norm2()
    zf = [psi.p(j) for j in range(n)] + [psi.x(j) for j in range(n)]
    cell = psi.grid.cell
    Zraw = np.array([np.sum(np.conj(f) * g).real * cell for g in zf])
    G = np.array([[np.sum(np.conj(a) * b) * cell for b in zf] for a in zf])
    second = 0.5 * (G + G.T).real
    M = c["Hzz"] + m.kappa * mass * c["Wzz"]
    lin = c["Hz"] + m.kappa * c["Wzw"] @ Zraw
    scalar = 0.5 * m.kappa * np.sum(c["Www"] * second)
    return apply_quadratic_grid(M, lin, psi) + scalar * f


def residual_norm(candidate, m: QuadraticModel) -> np.ndarray:
    """``||{-i hbar d/dt + H + kappa V(t, psi)} psi||`` at interior snapshots.

    ``candidate`` is a sequence of :class:`GridState` with increasing ``t``;
    the time derivative is the three-point formula on the snapshot times.
    """
    if len(candidate) < 3:
        raise ValueError("residual needs at least three snapshots")
    ts = np.array([s.t for s in candidate])
    if np.any(np.diff(ts) <= 0):
        raise ValueError("snapshot times must increase")
    res = np.empty(len(candidate) - 2)
    for k in range(1, len(candidate) - 1):
        h1, h2 = ts[k] - ts[k - 1], ts[k + 1] - ts[k]
        a = -h2 / (h1 * (h1 + h2))
        b = (h2 - h1) / (h1 * h2)
        c = h1 / (h2 * (h1 + h2))
        prev, cur, nxt = candidate[k - 1], candidate[k], candidate[k + 1]
        dpsi = a * prev.values + b * cur.values + c * nxt.values
        r = -1j * cur.hbar * dpsi + _apply_effective_hamiltonian(cur, m, ts[k])
        res[k - 1] = np.sqrt(np.sum(np.abs(r) ** 2) * cur.grid.cell)
    return res


def compare_l2(a: GridState, b: GridState) -> dict:
    """Raw and phase-aligned L2 distances; ``best_phase`` rotates ``a`` onto ``b``."""
    if a.grid != b.grid:
        raise ValueError("grid mismatch")
    raw = np.sqrt(np.sum(np.abs(a.values - b.values) ** 2) * a.grid.cell)
    ov = a.inner(b)
    phase = float(np.angle(ov)) if abs(ov) > 0 else 0.0
    aligned = np.sqrt(np.sum(np.abs(np.exp(1j * phase) * a.values - b.values) ** 2) * a.grid.cell)
    return {"raw_l2": float(raw), "phase_aligned_l2": float(aligned), "best_phase": phase}
