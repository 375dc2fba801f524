"""Uniform periodic grids, sampled wavefunctions and spectral operators."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from math import comb

import numpy as np

__all__ = ["Grid", "GridState", "apply_weyl_grid", "apply_quadratic_grid"]


@dataclass(frozen=True)
class Grid:
    """Tensor grid on ``[x_min, x_max)`` per axis with ``N`` points per axis."""

    x_min: tuple
    x_max: tuple
    N: tuple

    def __post_init__(self):
        for name in ("x_min", "x_max", "N"):
            v = getattr(self, name)
            v = tuple(np.atleast_1d(v).tolist())
            object.__setattr__(self, name, v)
        object.__setattr__(self, "N", tuple(int(k) for k in self.N))
        if not (len(self.x_min) == len(self.x_max) == len(self.N)):
            raise ValueError("grid axes disagree in length")
        if self.n_dim not in (1, 2):
            raise ValueError("only 1-D and 2-D grids are supported")
        for a, b, k in zip(self.x_min, self.x_max, self.N):
            if not b > a:
                raise ValueError("x_max must exceed x_min")
            if k < 64 or k & (k - 1):
                raise ValueError(f"N must be a power of two >= 64, got {k}")

    @classmethod
    def uniform(cls, n_dim, x_min, x_max, N):
        return cls((x_min,) * n_dim, (x_max,) * n_dim, (N,) * n_dim)

    @property
    def n_dim(self):
        return len(self.N)

    @property
    def shape(self):
        return self.N

    @property
    def dx(self):
        return tuple((b - a) / k for a, b, k in zip(self.x_min, self.x_max, self.N))

    @property
    def cell(self):
        return float(np.prod(self.dx))

    def axis(self, j):
        return self.x_min[j] + self.dx[j] * np.arange(self.N[j])

    @cached_property
    def _coords(self):
        return np.meshgrid(*[self.axis(j) for j in range(self.n_dim)], indexing="ij")

    @cached_property
    def _wavenumbers(self):
        ks = [2 * np.pi * np.fft.fftfreq(k, d) for k, d in zip(self.N, self.dx)]
        return np.meshgrid(*ks, indexing="ij")

    def coords(self):
        """Coordinate arrays (``indexing="ij"``); shared, do not modify."""
        return self._coords

    def wavenumbers(self):
        return self._wavenumbers


@dataclass(frozen=True, eq=False)
class GridState:
    grid: Grid
    values: np.ndarray
    hbar: float = 1.0
    t: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != self.grid.shape:
            raise ValueError(f"values shape {v.shape} does not match grid {self.grid.shape}")
        object.__setattr__(self, "values", v)

    @property
    def n_dim(self):
        return self.grid.n_dim

    def norm2(self):
        return float(np.sum(np.abs(self.values) ** 2) * self.grid.cell)

    def norm(self):
        return float(np.sqrt(self.norm2()))

    def inner(self, other):
        return complex(np.sum(np.conj(self.values) * other.values) * self.grid.cell)

    def with_values(self, values, t=None):
        return GridState(self.grid, values, self.hbar, self.t if t is None else t)

    def x(self, j, f=None):
        f = self.values if f is None else f
        return self.grid.coords()[j] * f

    def p(self, j, f=None):
        """Spectral ``-i hbar d/dx_j``."""
        f = self.values if f is None else f
        k = self.grid.wavenumbers()[j]
        return np.fft.ifftn(self.hbar * k * np.fft.fftn(f))

    def boundary_mass(self, fraction=0.05):
        """Share of the squared norm in the outer ``fraction`` of each axis."""
        rho = np.abs(self.values) ** 2
        total = rho.sum()
        if total == 0:
            return 0.0
        mask = np.zeros(self.grid.shape, dtype=bool)
        for j, k in enumerate(self.grid.N):
            w = max(1, int(round(fraction * k)))
            sl = [slice(None)] * self.n_dim
            sl[j] = slice(0, w)
            mask[tuple(sl)] = True
            sl[j] = slice(k - w, k)
            mask[tuple(sl)] = True
        return float(rho[mask].sum() / total)


def apply_weyl_grid(symbol, psi: GridState) -> np.ndarray:
    """Apply the Weyl quantisation of a polynomial symbol with spectral derivatives.

    Monomials ``p^a x^b`` per axis are ordered as
    ``2^-b sum_m C(b, m) x^m p^a x^(b-m)``.
    """
    n = psi.n_dim
    if symbol.n != n:
        raise ValueError("symbol dimension mismatch")
    out = np.zeros(psi.grid.shape, dtype=complex)
    for k, v in symbol.poly.terms():
        f = psi.values
        for j in range(n):
            a, b = k[j], k[n + j]
            if a == 0:
                for _ in range(b):
                    f = psi.x(j, f)
                continue
            acc = 0.0
            for m in range(b + 1):
                g = f
                for _ in range(b - m):
                    g = psi.x(j, g)
                for _ in range(a):
                    g = psi.p(j, g)
                for _ in range(m):
                    g = psi.x(j, g)
                acc = acc + comb(b, m) / 2.0 ** b * g
            f = acc
        out = out + v * f
    return out


def apply_quadratic_grid(M, c, psi: GridState, f=None) -> np.ndarray:
    """``(1/2 <z, M z> + <c, z>) f`` with Weyl ordering (``M`` symmetrised)."""
    f = psi.values if f is None else f
    n = psi.n_dim
    M = 0.5 * (np.asarray(M) + np.asarray(M).T)
    zf = [psi.p(j, f) for j in range(n)] + [psi.x(j, f) for j in range(n)]
    out = np.zeros_like(f)
    for i in range(2 * n):
        for j in range(2 * n):
            if M[i, j] != 0:
                zi = psi.p(i, zf[j]) if i < n else psi.x(i - n, zf[j])
                out = out + 0.5 * M[i, j] * zi
    if c is not None:
        for i in range(2 * n):
            if c[i] != 0:
                out = out + c[i] * zf[i]
    return out
