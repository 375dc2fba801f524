"""Polynomial x Gaussian wavefunctions and phase-space operators acting on them.

A :class:`HermiteGaussianState` is

    psi(x) = N f(y) exp{(i/hbar) [1/2 <y, Q y> + <p, y>]},   y = x - q,

with ``f`` a complex polynomial and ``Im Q`` positive definite.  The class is
closed under Weyl-quantised polynomials in ``z = (p, x)`` and under
phase-space displacements, so every operator used by the symmetry
constructions acts on it exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from itertools import product
from math import comb

import numpy as np
from scipy.signal import convolve

from .phase_space import symplectic_form

__all__ = [
    "Poly",
    "WeylPolySymbol",
    "PhaseSpaceOperator",
    "HermiteGaussianState",
    "DEFAULT_MAX_DEGREE",
    "gaussian_state",
]

DEFAULT_MAX_DEGREE = 4


class Poly:
    """Dense complex polynomial in ``nvars`` variables.

    Coefficient ``c[a1, ..., ak]`` multiplies ``y1**a1 ... yk**ak``; the array is
    always a cube of side ``deg + 1``.
    """

    __slots__ = ("c",)

    def __init__(self, coeffs):
        c = np.asarray(coeffs, dtype=complex)
        if c.ndim == 0:
            raise ValueError("use Poly.constant for scalars")
        side = max(c.shape)
        if any(s != side for s in c.shape):
            c = _pad(c, side)
        self.c = c

    @classmethod
    def constant(cls, nvars, value=1.0):
        return cls(np.full((1,) * nvars, value, dtype=complex))

    @classmethod
    def variable(cls, nvars, j):
        c = np.zeros((2,) * nvars, dtype=complex)
        idx = [0] * nvars
        idx[j] = 1
        c[tuple(idx)] = 1.0
        return cls(c)

    @classmethod
    def linear(cls, coeffs, const=0.0):
        coeffs = np.asarray(coeffs)
        nv = coeffs.size
        c = np.zeros((2,) * nv, dtype=complex)
        c[(0,) * nv] = const
        for j, v in enumerate(coeffs):
            idx = [0] * nv
            idx[j] = 1
            c[tuple(idx)] = v
        return cls(c)

    @classmethod
    def from_terms(cls, nvars, terms):
        """Build from ``{exponent tuple: coefficient}``."""
        deg = max([sum(k) for k in terms] + [0])
        c = np.zeros((deg + 1,) * nvars, dtype=complex)
        for k, v in terms.items():
            if len(k) != nvars:
                raise ValueError(f"exponent {k} does not have {nvars} entries")
            c[tuple(k)] += v
        return cls(c)

    @property
    def nvars(self):
        return self.c.ndim

    @property
    def degree(self):
        nz = np.argwhere(self.c != 0)
        return int(nz.sum(axis=1).max()) if nz.size else 0

    def terms(self):
        for idx in np.argwhere(self.c != 0):
            k = tuple(int(i) for i in idx)
            yield k, self.c[k]

    def trimmed(self):
        side = self.degree + 1
        return Poly(self.c[(slice(0, side),) * self.nvars])

    def __add__(self, other):
        if not isinstance(other, Poly):
            other = Poly.constant(self.nvars, other)
        side = max(self.c.shape[0], other.c.shape[0])
        return Poly(_pad(self.c, side) + _pad(other.c, side))

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-1.0) * other

    def __mul__(self, other):
        if isinstance(other, Poly):
            return Poly(convolve(self.c, other.c, method="direct")).trimmed()
        return Poly(self.c * other)

    __rmul__ = __mul__

    def __neg__(self):
        return Poly(-self.c)

    def mul_var(self, j):
        c = _pad(self.c, self.c.shape[0] + 1)
        return Poly(np.roll(c, 1, axis=j))

    def deriv(self, j):
        side = self.c.shape[0]
        if side == 1:
            return Poly(np.zeros_like(self.c))
        k = np.arange(side).reshape([-1 if a == j else 1 for a in range(self.nvars)])
        d = np.roll(self.c * k, -1, axis=j)
        return Poly(d)

    def __call__(self, *ys):
        """Evaluate at broadcastable coordinate arrays ``ys`` (one per variable)."""
        ys = [np.asarray(y) for y in ys]
        shape = np.broadcast(*ys).shape if ys else ()
        out = np.zeros(shape, dtype=complex)
        side = self.c.shape[0]
        pw = [[np.ones(shape)] for _ in ys]
        for j, y in enumerate(ys):
            for _ in range(1, side):
                pw[j].append(pw[j][-1] * y)
        for k, v in self.terms():
            out = out + v * reduce(np.multiply, [pw[j][k[j]] for j in range(len(ys))])
        return out

    def substitute_linear(self, L, shift=None):
        """Return ``g(z) = f(L z + shift)``; ``L`` has shape ``(nvars, new_nvars)``."""
        L = np.asarray(L)
        nv_new = L.shape[1]
        shift = np.zeros(L.shape[0]) if shift is None else np.asarray(shift)
        forms = [Poly.linear(L[i], shift[i]) for i in range(L.shape[0])]
        powers = [[Poly.constant(nv_new)] for _ in forms]
        side = self.c.shape[0]
        for i, f in enumerate(forms):
            for _ in range(1, side):
                powers[i].append(powers[i][-1] * f)
        out = Poly.constant(nv_new, 0.0)
        for k, v in self.terms():
            term = reduce(lambda a, b: a * b, [powers[i][k[i]] for i in range(len(k))])
            out = out + v * term
        return out.trimmed()

    def allclose(self, other, atol=1e-12):
        side = max(self.c.shape[0], other.c.shape[0])
        return np.allclose(_pad(self.c, side), _pad(other.c, side), atol=atol, rtol=0)

    def __repr__(self):
        return f"Poly({dict(self.terms())})"


def _pad(c, side):
    if c.shape and all(s == side for s in c.shape):
        return c
    out = np.zeros((side,) * c.ndim, dtype=complex)
    out[tuple(slice(0, s) for s in c.shape)] = c
    return out


@dataclass(frozen=True, eq=False)
class WeylPolySymbol:
    """Polynomial Weyl symbol ``a(z)`` on ``R^{2n}`` (momenta first)."""

    n: int
    poly: Poly
    max_degree: int = DEFAULT_MAX_DEGREE

    def __post_init__(self):
        if self.poly.nvars != 2 * self.n:
            raise ValueError("symbol polynomial must have 2n variables")
        object.__setattr__(self, "poly", self.poly.trimmed())
        if self.poly.degree > self.max_degree:
            raise ValueError(
                f"degree overflow: symbol degree {self.poly.degree} exceeds bound {self.max_degree}"
            )

    @classmethod
    def from_terms(cls, n, terms, max_degree=DEFAULT_MAX_DEGREE):
        return cls(n, Poly.from_terms(2 * n, terms), max_degree)

    @classmethod
    def one(cls, n):
        return cls(n, Poly.constant(2 * n))

    @classmethod
    def linear(cls, c, const=0.0):
        c = np.asarray(c)
        return cls(c.size // 2, Poly.linear(c, const))

    @classmethod
    def quadratic(cls, M, c=None):
        """Symbol ``1/2 <z, M z> + <c, z>``."""
        M = np.asarray(M, dtype=float)
        d = M.shape[0]
        terms = {}
        for i in range(d):
            for j in range(d):
                k = [0] * d
                k[i] += 1
                k[j] += 1
                terms[tuple(k)] = terms.get(tuple(k), 0.0) + 0.5 * M[i, j]
        if c is not None:
            for i, v in enumerate(c):
                k = [0] * d
                k[i] = 1
                terms[tuple(k)] = terms.get(tuple(k), 0.0) + v
        return cls.from_terms(d // 2, terms)

    @property
    def degree(self):
        return self.poly.degree

    def __call__(self, z):
        z = np.asarray(z)
        return self.poly(*z)

    def __add__(self, other):
        return WeylPolySymbol(self.n, self.poly + other.poly, self.max_degree)

    def __sub__(self, other):
        return WeylPolySymbol(self.n, self.poly - other.poly, self.max_degree)

    def __mul__(self, s):
        return WeylPolySymbol(self.n, self.poly * s, self.max_degree)

    __rmul__ = __mul__

    def composed(self, L, shift=None):
        """Symbol ``z -> a(L z + shift)``."""
        return WeylPolySymbol(self.n, self.poly.substitute_linear(L, shift), self.max_degree)

    def transported(self, Lambda):
        """``a(Lambda^{-1} z)``: the symbol carried by the linear flow ``Lambda``."""
        J = symplectic_form(self.n)
        inv = -J @ np.asarray(Lambda).T @ J
        return self.composed(inv)

    def shifted(self, c):
        """``a(z + c)``: symbol of ``T(c)^+ A T(c)``."""
        return self.composed(np.eye(2 * self.n), c)

    def allclose(self, other, atol=1e-12):
        return self.poly.allclose(other.poly, atol)


def _displacement_product_phase(a, b, hbar):
    """Phase ``phi`` with ``T(a) T(b) = exp(i phi) T(a + b)``."""
    n = len(a) // 2
    return -0.5 / hbar * float(np.asarray(a) @ symplectic_form(n) @ np.asarray(b))


@dataclass(frozen=True, eq=False)
class PhaseSpaceOperator:
    """The operator ``coeff * T(shift) * Op_W(symbol)``.

    ``T(d) = exp{(i/hbar)(<d_p, x> - <d_x, p>)}`` moves phase-space means by
    ``d``.  Polynomial symbols, pure displacements and their products under
    conjugation by displacements all live in this class.
    """

    n: int
    hbar: float
    coeff: complex = 1.0
    shift: np.ndarray = None
    symbol: WeylPolySymbol = None

    def __post_init__(self):
        d = np.zeros(2 * self.n) if self.shift is None else np.asarray(self.shift, dtype=float)
        if d.shape != (2 * self.n,):
            raise ValueError("shift must have length 2n")
        object.__setattr__(self, "shift", d)
        if self.symbol is None:
            object.__setattr__(self, "symbol", WeylPolySymbol.one(self.n))
        object.__setattr__(self, "coeff", complex(self.coeff))

    @classmethod
    def identity(cls, n, hbar):
        return cls(n, hbar)

    @classmethod
    def displacement(cls, d, hbar):
        d = np.asarray(d, dtype=float)
        return cls(d.size // 2, hbar, shift=d)

    @classmethod
    def polynomial(cls, symbol: WeylPolySymbol, hbar, coeff=1.0):
        return cls(symbol.n, hbar, coeff=coeff, symbol=symbol)

    @property
    def is_polynomial(self):
        return not np.any(self.shift)

    def apply(self, state: "HermiteGaussianState") -> "HermiteGaussianState":
        out = state.apply_weyl(self.symbol)
        if np.any(self.shift):
            out = out.displaced(self.shift)
        return out.scaled(self.coeff)

    __call__ = apply

    def scaled(self, c):
        return PhaseSpaceOperator(self.n, self.hbar, self.coeff * c, self.shift, self.symbol)

    def transported(self, Lambda):
        """``U A U^+`` for the metaplectic ``U`` with classical flow ``Lambda``."""
        Lambda = np.asarray(Lambda)
        return PhaseSpaceOperator(self.n, self.hbar, self.coeff, Lambda @ self.shift,
                                  self.symbol.transported(Lambda))

    def conjugated(self, c):
        """``T(c)^+ A T(c)``."""
        c = np.asarray(c, dtype=float)
        J = symplectic_form(self.n)
        phase = float((J @ self.shift) @ c) / self.hbar
        return PhaseSpaceOperator(self.n, self.hbar, self.coeff * np.exp(1j * phase),
                                  self.shift, self.symbol.shifted(c))

    def left_displaced(self, e):
        """``T(e) A``."""
        e = np.asarray(e, dtype=float)
        phase = _displacement_product_phase(e, self.shift, self.hbar)
        return PhaseSpaceOperator(self.n, self.hbar, self.coeff * np.exp(1j * phase),
                                  e + self.shift, self.symbol)


def _moment_table(Sigma, maxdeg):
    """``E[y^k]`` for ``y ~ N(0, Sigma)``, all multi-indices of degree <= maxdeg."""
    n = Sigma.shape[0]
    side = maxdeg + 1
    E = np.zeros((side,) * n)
    E[(0,) * n] = 1.0
    order = sorted(product(range(side), repeat=n), key=sum)
    for k in order:
        s = sum(k)
        if s == 0 or s > maxdeg:
            continue
        j = next(i for i in range(n) if k[i] > 0)
        base = list(k)
        base[j] -= 1
        val = 0.0
        for i in range(n):
            if base[i] > 0:
                kk = list(base)
                kk[i] -= 1
                val += Sigma[j, i] * base[i] * E[tuple(kk)]
        E[k] = val
    return E


@dataclass(frozen=True, eq=False)
class HermiteGaussianState:
    """``N f(x - q) exp{(i/hbar)[1/2 <y,Qy> + <p,y>]}`` (see module docstring)."""

    n: int
    hbar: float
    N: complex
    q: np.ndarray
    p: np.ndarray
    Q: np.ndarray
    poly: Poly = None

    def __post_init__(self):
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float).reshape(self.n))
        object.__setattr__(self, "p", np.asarray(self.p, dtype=float).reshape(self.n))
        Q = np.asarray(self.Q, dtype=complex).reshape(self.n, self.n)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "N", complex(self.N))
        if self.poly is None:
            object.__setattr__(self, "poly", Poly.constant(self.n))
        if self.poly.nvars != self.n:
            raise ValueError("prefactor polynomial must have n variables")
        if np.abs(Q - Q.T).max() > 1e-10 * max(1.0, np.abs(Q).max()):
            raise ValueError("Q must be symmetric")
        ev = np.linalg.eigvalsh(0.5 * (Q.imag + Q.imag.T))
        if ev.min() <= 0:
            raise ValueError("non-normalizable state: Im Q must be positive definite")

    # -- evaluation -------------------------------------------------------
    def __call__(self, *xs):
        ys = [np.asarray(x) - self.q[j] for j, x in enumerate(xs)]
        quad = sum(0.5 * self.Q[j, k] * ys[j] * ys[k] for j in range(self.n) for k in range(self.n))
        lin = sum(self.p[j] * ys[j] for j in range(self.n))
        return self.N * self.poly(*ys) * np.exp(1j / self.hbar * (quad + lin))

    def sample(self, grid, t=0.0):
        from .grid import GridState
        return GridState(grid, self(*grid.coords()), self.hbar, t)

    @property
    def center(self):
        return np.concatenate([self.p, self.q])

    # -- closed-form integrals -------------------------------------------
    def _same_envelope(self, other):
        return (np.allclose(self.q, other.q, atol=1e-13) and np.allclose(self.p, other.p, atol=1e-13)
                and np.allclose(self.Q, other.Q, atol=1e-13) and self.hbar == other.hbar)

    def inner(self, other: "HermiteGaussianState") -> complex:
        """``<self|other>`` in closed form; both states must share the envelope."""
        if not self._same_envelope(other):
            raise ValueError("closed-form inner product needs a shared Gaussian envelope")
        A = self.Q.imag / self.hbar
        Sigma = 0.5 * np.linalg.inv(A)
        d1, d2 = self.poly.c.shape[0] - 1, other.poly.c.shape[0] - 1
        E = _moment_table(Sigma, d1 + d2)
        pref = np.conj(self.N) * other.N * np.pi ** (self.n / 2) / np.sqrt(np.linalg.det(A))
        total = 0.0j
        for ka, va in self.poly.terms():
            for kb, vb in other.poly.terms():
                total += np.conj(va) * vb * E[tuple(a + b for a, b in zip(ka, kb))]
        return complex(pref * total)

    def norm2(self) -> float:
        return float(self.inner(self).real)

    def norm(self) -> float:
        return float(np.sqrt(self.norm2()))

    # -- operator action --------------------------------------------------
    def _with_poly(self, poly, N=None):
        return HermiteGaussianState(self.n, self.hbar, self.N if N is None else N,
                                    self.q, self.p, self.Q, poly)

    def _x(self, f: Poly, j: int) -> Poly:
        return f.mul_var(j) + self.q[j] * f

    def _p(self, f: Poly, j: int) -> Poly:
        out = (-1j * self.hbar) * f.deriv(j) + self.p[j] * f
        for k in range(self.n):
            if self.Q[j, k] != 0:
                out = out + self.Q[j, k] * f.mul_var(k)
        return out

    def x_op(self, j):
        return self._with_poly(self._x(self.poly, j))

    def p_op(self, j):
        return self._with_poly(self._p(self.poly, j))

    def _weyl_monomial(self, f: Poly, k) -> Poly:
        n = self.n
        for j in range(n):
            a, b = k[j], k[n + j]
            if a == 0 and b == 0:
                continue
            if a == 0:
                for _ in range(b):
                    f = self._x(f, j)
                continue
            acc = None
            for m in range(b + 1):
                g = f
                for _ in range(b - m):
                    g = self._x(g, j)
                for _ in range(a):
                    g = self._p(g, j)
                for _ in range(m):
                    g = self._x(g, j)
                g = (comb(b, m) / 2.0 ** b) * g
                acc = g if acc is None else acc + g
            f = acc
        return f

    def apply_weyl(self, symbol: WeylPolySymbol) -> "HermiteGaussianState":
        """Act with the Weyl quantisation of a polynomial symbol."""
        if symbol.n != self.n:
            raise ValueError("symbol dimension mismatch")
        out = Poly.constant(self.n, 0.0)
        for k, v in symbol.poly.terms():
            out = out + v * self._weyl_monomial(self.poly, k)
        return self._with_poly(out.trimmed())

    def displaced(self, d) -> "HermiteGaussianState":
        """``T(d) psi``: ``exp{(i/hbar)(<d_p, x> - <d_p, d_x>/2)} psi(x - d_x)``."""
        d = np.asarray(d, dtype=float)
        dp, dx = d[:self.n], d[self.n:]
        q_new = self.q + dx
        N = self.N * np.exp(1j / self.hbar * (dp @ q_new - 0.5 * dp @ dx))
        return HermiteGaussianState(self.n, self.hbar, N, q_new, self.p + dp, self.Q, self.poly)

    def scaled(self, c) -> "HermiteGaussianState":
        return HermiteGaussianState(self.n, self.hbar, self.N * c, self.q, self.p, self.Q, self.poly)

    def normalized(self) -> "HermiteGaussianState":
        return self.scaled(1.0 / self.norm())

    def to_frame(self, Z) -> "HermiteGaussianState":
        """``u -> exp{-(i/hbar)<P, u>} psi(u + X)`` for ``Z = (P, X)``."""
        Z = np.asarray(Z, dtype=float)
        P, X = Z[:self.n], Z[self.n:]
        q_new = self.q - X
        N = self.N * np.exp(-1j / self.hbar * (P @ q_new))
        return HermiteGaussianState(self.n, self.hbar, N, q_new, self.p - P, self.Q, self.poly)

    def from_frame(self, Z, S=0.0) -> "HermiteGaussianState":
        """``x -> exp{(i/hbar)[S + <P, x - X>]} phi(x - X)``; inverse of :meth:`to_frame` at S=0."""
        Z = np.asarray(Z, dtype=float)
        P, X = Z[:self.n], Z[self.n:]
        N = self.N * np.exp(1j / self.hbar * (S + P @ self.q))
        return HermiteGaussianState(self.n, self.hbar, N, self.q + X, self.p + P, self.Q, self.poly)


def gaussian_state(n, hbar=1.0, Q=None, center=None, poly=None, normalize=True):
    """Convenience constructor; ``Q`` defaults to ``i I`` and ``center`` to the origin."""
    Q = 1j * np.eye(n) if Q is None else np.atleast_2d(np.asarray(Q, dtype=complex))
    center = np.zeros(2 * n) if center is None else np.asarray(center, dtype=float)
    s = HermiteGaussianState(n, hbar, 1.0, center[n:], center[:n], Q, poly)
    return s.normalized() if normalize else s
