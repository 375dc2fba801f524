"""Phase-space structure and time-dependent quadratic coefficient models.

Phase-space vectors are ordered ``z = (p_1..p_n, x_1..x_n)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "symplectic_form",
    "CoefficientProvider",
    "Constant",
    "Sampled",
    "Modulated",
    "as_provider",
    "QuadraticModel",
    "validate_model",
    "effective_linear_matrix",
]


def symplectic_form(n: int) -> np.ndarray:
    """Return the 2n x 2n matrix ``[[0, -I], [I, 0]]``."""
    if int(n) != n or n < 1:
        raise ValueError(f"dimension must be a positive integer, got {n!r}")
    n = int(n)
    J = np.zeros((2 * n, 2 * n))
    J[:n, n:] = -np.eye(n)
    J[n:, :n] = np.eye(n)
    return J


class CoefficientProvider:
    """Deterministic map ``t -> array`` of fixed shape.

    Subclasses implement :meth:`stack`, which evaluates on a 1-D array of times
    and returns an array of shape ``(len(times),) + shape``.
    """

    shape: tuple = ()
    kind: str = "abstract"

    def __call__(self, t: float) -> np.ndarray:
        return self.stack(np.atleast_1d(np.asarray(t, dtype=float)))[0]

    def stack(self, times: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def covers(self, t0: float, t1: float) -> bool:
        return True

    def sample_times(self) -> np.ndarray:
        """Times at which the provider is worth inspecting (knots, if any)."""
        return np.empty(0)


@dataclass(frozen=True, eq=False)
class Constant(CoefficientProvider):
    value: np.ndarray
    kind = "constant"

    def __post_init__(self):
        v = np.array(self.value, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "value", v)

    @property
    def shape(self):
        return self.value.shape

    def stack(self, times):
        times = np.asarray(times, dtype=float)
        return np.broadcast_to(self.value, (times.size,) + self.value.shape).copy()


@dataclass(frozen=True, eq=False)
class Sampled(CoefficientProvider):
    """Piecewise-linear interpolation between samples at strictly increasing knots."""

    knots: np.ndarray
    values: np.ndarray
    kind = "sampled"

    def __post_init__(self):
        k = np.array(self.knots, dtype=float)
        v = np.array(self.values, dtype=float)
        if k.ndim != 1 or k.size < 1 or v.shape[0] != k.size:
            raise ValueError("knots must be 1-D and match the leading axis of values")
        if np.any(np.diff(k) <= 0):
            raise ValueError("knots must be strictly increasing")
        k.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "knots", k)
        object.__setattr__(self, "values", v)

    @property
    def shape(self):
        return self.values.shape[1:]

    def covers(self, t0, t1):
        return self.knots[0] <= t0 and t1 <= self.knots[-1]

    def sample_times(self):
        return self.knots

    def stack(self, times):
        times = np.asarray(times, dtype=float)
        k = self.knots
        if np.any(times < k[0]) or np.any(times > k[-1]):
            raise ValueError(
                f"time outside sampled window [{k[0]}, {k[-1]}]"
            )
        if k.size == 1:
            return np.broadcast_to(self.values[0], (times.size,) + self.shape).copy()
        idx = np.clip(np.searchsorted(k, times, side="right") - 1, 0, k.size - 2)
        w = (times - k[idx]) / (k[idx + 1] - k[idx])
        w = w.reshape((-1,) + (1,) * len(self.shape))
        out = (1.0 - w) * self.values[idx] + w * self.values[idx + 1]
        # knot values are returned exactly
        exact = times == k[idx + 1]
        out[exact] = self.values[idx[exact] + 1]
        return out


@dataclass(frozen=True, eq=False)
class Modulated(CoefficientProvider):
    """``base + (a + b cos(nu t))`` added on the position-position block."""

    base: np.ndarray
    a: float
    b: float
    nu: float
    kind = "profile"

    def __post_init__(self):
        v = np.array(self.base, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1] or v.shape[0] % 2:
            raise ValueError("modulated profile needs a square 2n x 2n base")
        v.setflags(write=False)
        object.__setattr__(self, "base", v)

    @property
    def shape(self):
        return self.base.shape

    def stack(self, times):
        times = np.asarray(times, dtype=float)
        n = self.base.shape[0] // 2
        omega = self.a + self.b * np.cos(self.nu * times)
        out = np.broadcast_to(self.base, (times.size,) + self.base.shape).copy()
        idx = np.arange(n, 2 * n)
        out[:, idx, idx] += omega[:, None]
        return out


def as_provider(obj) -> CoefficientProvider:
    if isinstance(obj, CoefficientProvider):
        return obj
    return Constant(np.asarray(obj, dtype=float))


@dataclass(frozen=True, eq=False)
class QuadraticModel:
    """Coefficients of the quadratic Hamiltonian and nonlocal kernel.

    ``kappa_tilde`` defaults to ``kappa * norm2`` where ``norm2`` is the squared
    norm of the Cauchy data (1 for normalized initial states).
    """

    n: int
    hbar: float = 1.0
    kappa: float = 0.0
    Hzz: CoefficientProvider = None
    Hz: CoefficientProvider = None
    Wzz: CoefficientProvider = None
    Wzw: CoefficientProvider = None
    Www: CoefficientProvider = None
    kappa_tilde: Optional[float] = None
    norm2: float = 1.0
    window: Optional[tuple] = None

    def __post_init__(self):
        d = 2 * self.n
        zero = np.zeros((d, d))
        for name in ("Hzz", "Wzz", "Wzw", "Www"):
            val = getattr(self, name)
            object.__setattr__(self, name, as_provider(zero if val is None else val))
        object.__setattr__(
            self, "Hz", as_provider(np.zeros(d) if self.Hz is None else self.Hz)
        )
        if self.kappa_tilde is None:
            object.__setattr__(self, "kappa_tilde", float(self.kappa) * float(self.norm2))
        if self.window is not None:
            object.__setattr__(self, "window", (float(self.window[0]), float(self.window[1])))

    @property
    def dim(self) -> int:
        return 2 * self.n

    @property
    def J(self) -> np.ndarray:
        return symplectic_form(self.n)

    def replace(self, **changes) -> "QuadraticModel":
        fields = dict(
            n=self.n, hbar=self.hbar, kappa=self.kappa, Hzz=self.Hzz, Hz=self.Hz,
            Wzz=self.Wzz, Wzw=self.Wzw, Www=self.Www, kappa_tilde=self.kappa_tilde,
            norm2=self.norm2, window=self.window,
        )
        if "kappa" in changes and "kappa_tilde" not in changes:
            fields["kappa_tilde"] = None
        fields.update(changes)
        return QuadraticModel(**fields)

    def check_time(self, times) -> None:
        if self.window is None:
            return
        t = np.asarray(times, dtype=float)
        lo, hi = self.window
        eps = 1e-12 * max(1.0, abs(lo), abs(hi))
        if t.size and (t.min() < lo - eps or t.max() > hi + eps):
            raise ValueError(f"time outside model window [{lo}, {hi}]")

    def coefficients(self, times) -> dict:
        """Evaluate every block on ``times``; keys Hzz, Hz, Wzz, Wzw, Www."""
        times = np.atleast_1d(np.asarray(times, dtype=float))
        self.check_time(times)
        return {name: getattr(self, name).stack(times)
                for name in ("Hzz", "Hz", "Wzz", "Wzw", "Www")}


def _inspection_times(m: QuadraticModel, t_window) -> np.ndarray:
    pts = [np.asarray(p.sample_times()) for p in (m.Hzz, m.Hz, m.Wzz, m.Wzw, m.Www)]
    if t_window is not None:
        lo, hi = t_window
        pts.append(np.linspace(lo, hi, 33))
    else:
        pts.append(np.zeros(1))
    ts = np.unique(np.concatenate(pts))
    if t_window is not None:
        ts = ts[(ts >= t_window[0]) & (ts <= t_window[1])]
    return ts


def validate_model(m: QuadraticModel, t_window: Optional[Sequence[float]] = None) -> list:
    """Check model invariants; return a list of human-readable diagnostics.

    An empty list means the model is usable on ``t_window`` (defaults to
    ``m.window``). Never raises.
    """
    diags = []
    if t_window is None:
        t_window = m.window
    try:
        if not np.isfinite(m.hbar) or m.hbar <= 0:
            diags.append(f"hbar must be positive, got {m.hbar}")
        d = 2 * m.n
        for name in ("Hzz", "Wzz", "Wzw", "Www"):
            if tuple(getattr(m, name).shape) != (d, d):
                diags.append(f"{name} has shape {getattr(m, name).shape}, expected {(d, d)}")
        if tuple(m.Hz.shape) != (d,):
            diags.append(f"Hz has shape {m.Hz.shape}, expected {(d,)}")
        if t_window is not None:
            t0, t1 = t_window
            if not t1 > t0:
                diags.append(f"empty time window [{t0}, {t1}]")
            for name in ("Hzz", "Hz", "Wzz", "Wzw", "Www"):
                if not getattr(m, name).covers(t0, t1):
                    diags.append(f"{name}: time window not covered (t in [{t0}, {t1}])")
        if diags:
            return diags
        ts = _inspection_times(m, t_window)
        for name in ("Hzz", "Hz", "Wzz", "Wzw", "Www"):
            prov = getattr(m, name)
            inside = ts if prov.covers(ts.min(), ts.max()) else ts[
                (ts >= prov.sample_times().min()) & (ts <= prov.sample_times().max())]
            vals = prov.stack(inside)
            bad = ~np.isfinite(vals).reshape(len(inside), -1).all(axis=1)
            for t in inside[bad]:
                diags.append(f"{name} not finite at t={t:g}")
            if name in ("Hzz", "Wzz", "Www"):
                asym = np.abs(vals - np.swapaxes(vals, 1, 2)).max(axis=(1, 2))
                scale = np.maximum(np.abs(vals).max(axis=(1, 2)), 1.0)
                for t, a in zip(inside, asym / scale):
                    if a > 1e-14:
                        diags.append(f"{name} not symmetric at t={t:g}")
                        break
    except Exception as exc:  # report, never raise
        diags.append(f"model evaluation failed: {exc}")
    return diags


def effective_linear_matrix(m: QuadraticModel, t) -> np.ndarray:
    """Return ``Hzz(t) + kappa_tilde * Wzz(t)``; vectorised over array ``t``."""
    scalar = np.ndim(t) == 0
    c = m.coefficients(t)
    M = c["Hzz"] + m.kappa_tilde * c["Wzz"]
    return M[0] if scalar else M
