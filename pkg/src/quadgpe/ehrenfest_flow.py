"""Hamilton-Ehrenfest moment dynamics and action integrals.

All systems here are linear (or affine) in the unknowns, so one classical RK4
step is a matrix.  The per-step matrices are built for the whole time grid at
once and then chained; quadratic functionals (actions, phases) are integrated
with the same RK4 stages, reconstructed from the node values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .phase_space import QuadraticModel, symplectic_form

__all__ = [
    "TrajectoryBundle",
    "LambdaTrajectory",
    "check_times",
    "evolve_center",
    "evolve_delta2",
    "linearized_flow",
    "action_integral",
    "lambda_flow",
    "evolve",
    "hamilton_ehrenfest",
    "evolve_auxiliary_cauchy",
    "symplectic_defect",
    "project_symplectic",
    "step_halving_error",
    "metaplectic_flow",
]

SYMPLECTIC_DRIFT_TOL = 1e-10


@dataclass(frozen=True)
class TrajectoryBundle:
    """Center ``Z``, covariance ``Delta2``, flow ``Lambda`` and action ``S`` on ``times``."""

    times: np.ndarray
    Z: np.ndarray
    Delta2: np.ndarray
    Lambda: np.ndarray
    S: np.ndarray

    @property
    def n(self) -> int:
        return self.Z.shape[1] // 2

    def at(self, t: float) -> int:
        """Index of the grid knot closest to ``t``."""
        return int(np.argmin(np.abs(self.times - t)))


@dataclass(frozen=True)
class LambdaTrajectory:
    times: np.ndarray
    lam: np.ndarray
    S_lambda: np.ndarray


def check_times(times) -> np.ndarray:
    t = np.asarray(times, dtype=float)
    if t.ndim != 1 or t.size < 1:
        raise ValueError("time grid must be a non-empty 1-D array")
    if np.any(np.diff(t) <= 0):
        raise ValueError("time grid must be strictly increasing")
    return t


class _Coefficients:
    """Model blocks evaluated at the RK4 stage times of a grid."""

    def __init__(self, m: QuadraticModel, times: np.ndarray):
        self.m = m
        self.times = times
        self.h = np.diff(times)
        mids = times[:-1] + 0.5 * self.h
        self.nodes = m.coefficients(times)
        self.mids = m.coefficients(mids) if mids.size else {
            k: v[:0] for k, v in self.nodes.items()}
        self.J = symplectic_form(m.n)

    def stages(self, fn):
        """Return ``(f(t_k), f(t_k + h/2), f(t_{k+1}))`` stacks of length T-1."""
        a = fn(self.nodes)
        b = fn(self.mids)
        return a[:-1], b, a[1:]

    def M(self, c):
        return c["Hzz"] + self.m.kappa_tilde * c["Wzz"]

    def G(self, c):
        return c["Hzz"] + self.m.kappa_tilde * (c["Wzz"] + c["Wzw"])

    def K(self, c):
        kt = self.m.kappa_tilde
        return c["Hzz"] + kt * (c["Wzz"] + c["Wzw"] + np.swapaxes(c["Wzw"], 1, 2) + c["Www"])

    def JM(self, c):
        return self.J @ self.M(c)

    def center_generator(self, c):
        """Augmented matrix of the affine center equation acting on (Z, 1)."""
        d = 2 * self.m.n
        A = np.zeros((c["Hzz"].shape[0], d + 1, d + 1))
        A[:, :d, :d] = self.J @ self.G(c)
        A[:, :d, d] = c["Hz"] @ self.J.T
        return A


def _rk4_transfer(A0, Am, A1, h):
    """One-step RK4 propagators for y' = A(t) y (batched over steps)."""
    d = A0.shape[-1]
    eye = np.eye(d)
    h = h[:, None, None]
    P1 = A0
    P2 = Am @ (eye + 0.5 * h * P1)
    P3 = Am @ (eye + 0.5 * h * P2)
    P4 = A1 @ (eye + h * P3)
    return eye + h / 6.0 * (P1 + 2.0 * P2 + 2.0 * P3 + P4)


def _chain(R, y0, post=None):
    out = np.empty((R.shape[0] + 1,) + np.shape(y0), dtype=np.result_type(R, y0))
    out[0] = y0
    y = out[0]
    for k in range(R.shape[0]):
        y = R[k] @ y
        if post is not None:
            y = post(y)
        out[k + 1] = y
    return out


def _stage_values(ops, Y, h):
    """RK4 stage values ``Y1..Y4`` for a linear right-hand side.

    ``ops`` are callables evaluating the right-hand side at the start, middle
    and end of each step; ``Y`` holds the node values at step starts.
    """
    f0, fm, f1 = ops
    hb = h.reshape((-1,) + (1,) * (Y.ndim - 1))
    Y2 = Y + 0.5 * hb * f0(Y)
    Y3 = Y + 0.5 * hb * fm(Y2)
    Y4 = Y + hb * fm(Y3)
    return Y, Y2, Y3, Y4


def _rk4_quadrature(values, h, q0=0.0):
    """Accumulate ``q' = g`` from the four RK4 stage values of ``g``."""
    g1, g2, g3, g4 = values
    inc = h / 6.0 * (g1 + 2.0 * g2 + 2.0 * g3 + g4)
    return q0 + np.concatenate([[0.0], np.cumsum(inc)])


def _lyapunov_vec(B):
    """Row-major vectorisation of ``D -> B D + D B^T`` (batched)."""
    d = B.shape[-1]
    eye = np.eye(d)
    return np.einsum("tik,jl->tijkl", B, eye).reshape(-1, d * d, d * d) + \
        np.einsum("ik,tjl->tijkl", eye, B).reshape(-1, d * d, d * d)


def _center(c: _Coefficients, Z0):
    A0, Am, A1 = c.stages(c.center_generator)
    R = _rk4_transfer(A0, Am, A1, c.h)
    y0 = np.append(np.asarray(Z0, dtype=float), 1.0)
    return _chain(R, y0)[:, :-1]


def _delta2(c: _Coefficients, D0):
    d = D0.shape[0]
    B0, Bm, B1 = c.stages(c.JM)
    R = _rk4_transfer(_lyapunov_vec(B0), _lyapunov_vec(Bm), _lyapunov_vec(B1), c.h)

    def sym(v):
        D = v.reshape(d, d)
        return (0.5 * (D + D.T)).ravel()

    return _chain(R, D0.ravel(), post=sym).reshape(-1, d, d)


def symplectic_defect(Lambda: np.ndarray) -> np.ndarray:
    """``max |L^T J L - J|`` for a single matrix or a stack."""
    L = np.asarray(Lambda)
    J = symplectic_form(L.shape[-1] // 2)
    E = np.swapaxes(L, -1, -2) @ J @ L - J
    return np.abs(E).max(axis=(-2, -1))


def project_symplectic(L: np.ndarray, iterations: int = 3) -> np.ndarray:
    """Pull a nearly symplectic matrix back onto the symplectic group.

    Uses the first-order correction ``L <- L (I + J E / 2)`` with
    ``E = L^T J L - J``, iterated.
    """
    J = symplectic_form(L.shape[-1] // 2)
    for _ in range(iterations):
        E = L.T @ J @ L - J
        L = L @ (np.eye(L.shape[0]) + 0.5 * J @ E)
    return L


def _flow(c: _Coefficients):
    A0, Am, A1 = c.stages(c.JM)
    R = _rk4_transfer(A0, Am, A1, c.h)
    d = A0.shape[-1] if A0.size else 2 * c.m.n
    L = _chain(R, np.eye(d))
    if np.any(symplectic_defect(L) > SYMPLECTIC_DRIFT_TOL):
        L = _chain(R, np.eye(d), post=project_symplectic)
    return L, R


def evolve_center(Z0, m: QuadraticModel, times) -> np.ndarray:
    """Integrate ``Z' = J{Hz + [Hzz + kt (Wzz + Wzw)] Z}``; returns ``(T, 2n)``."""
    times = check_times(times)
    Z0 = np.asarray(Z0, dtype=float)
    if Z0.shape != (2 * m.n,):
        raise ValueError(f"Z0 must have length {2 * m.n}")
    return _center(_Coefficients(m, times), Z0)


def evolve_delta2(Delta2_0, m: QuadraticModel, times) -> np.ndarray:
    """Integrate ``D' = J M D - D M J`` with ``M = Hzz + kt Wzz``; returns ``(T, 2n, 2n)``."""
    times = check_times(times)
    D0 = np.asarray(Delta2_0, dtype=float)
    if D0.shape != (2 * m.n, 2 * m.n):
        raise ValueError("Delta2_0 has the wrong shape")
    if np.abs(D0 - D0.T).max() > 1e-12 * max(1.0, np.abs(D0).max()):
        raise ValueError("Delta2_0 must be symmetric")
    return _delta2(_Coefficients(m, times), D0)


def linearized_flow(m: QuadraticModel, times) -> np.ndarray:
    """Fundamental matrix of ``L' = J (Hzz + kt Wzz) L``, ``L(t0) = I``."""
    times = check_times(times)
    return _flow(_Coefficients(m, times))[0]


def _action_from_nodes(c: _Coefficients, Z, D, S0=0.0):
    n = c.m.n
    kt = c.m.kappa_tilde
    T = Z.shape[0]
    if T == 1:
        return np.array([S0], dtype=float)
    Aaug = c.stages(c.center_generator)
    Bs = c.stages(c.JM)
    Ks = c.stages(c.K)
    Hzs = c.stages(lambda cc: cc["Hz"])
    Wws = c.stages(lambda cc: cc["Www"])
    Y = np.concatenate([Z[:-1], np.ones((T - 1, 1))], axis=1)[:, :, None]
    zst = _stage_values([lambda y, A=A: A @ y for A in Aaug], Y, c.h)
    dst = _stage_values([lambda y, B=B: B @ y + y @ np.swapaxes(B, 1, 2) for B in Bs],
                        D[:-1], c.h)
    which = (0, 1, 1, 2)  # coefficient sample used by each stage
    g = []
    for s in range(4):
        k = which[s]
        y = zst[s]
        zdot = (Aaug[k] @ y)[:, :-1, 0]
        z = y[:, :-1, 0]
        h_val = 0.5 * np.einsum("ti,tij,tj->t", z, Ks[k], z) + np.einsum("ti,ti->t", Hzs[k], z) \
            + 0.5 * kt * np.einsum("tij,tji->t", Wws[k], dst[s])
        g.append(np.einsum("ti,ti->t", z[:, :n], zdot[:, n:]) - h_val)
    return _rk4_quadrature(g, c.h, S0)


def action_integral(times, Z, Delta2, m: QuadraticModel, S0: float = 0.0) -> np.ndarray:
    """Action ``S(t) = S0 + int (<P, X'> - h(t)) dt`` along a computed trajectory.

    ``h(t) = 1/2 <Z, [Hzz + kt(Wzz + 2 Wzw + Www)] Z> + <Hz, Z> + kt/2 tr(Www Delta2)``.
    ``Z`` and ``Delta2`` must be node values on ``times``; the integrand is
    evaluated on the RK4 stages of the center/covariance equations.
    """
    times = check_times(times)
    Z = np.asarray(Z, dtype=float)
    D = np.asarray(Delta2, dtype=float)
    if Z.shape[0] != times.size or D.shape[0] != times.size:
        raise ValueError("Z, Delta2 and times must share the same grid")
    return _action_from_nodes(_Coefficients(m, times), Z, D, S0)


def evolve(Z0, Delta2_0, m: QuadraticModel, times, S0: float = 0.0) -> TrajectoryBundle:
    """Center, covariance, flow and action in one pass."""
    times = check_times(times)
    Z0 = np.asarray(Z0, dtype=float)
    D0 = np.asarray(Delta2_0, dtype=float)
    if Z0.shape != (2 * m.n,) or D0.shape != (2 * m.n, 2 * m.n):
        raise ValueError("initial moments have the wrong shape")
    if np.abs(D0 - D0.T).max() > 1e-12 * max(1.0, np.abs(D0).max()):
        raise ValueError("Delta2_0 must be symmetric")
    c = _Coefficients(m, times)
    Z = _center(c, Z0)
    D = _delta2(c, D0)
    L, _ = _flow(c)
    S = _action_from_nodes(c, Z, D, S0)
    return TrajectoryBundle(times=times, Z=Z, Delta2=D, Lambda=L, S=S)


hamilton_ehrenfest = evolve


def evolve_auxiliary_cauchy(ZA0, Delta2A0, m: QuadraticModel, times) -> TrajectoryBundle:
    """Trajectory bundle of the transformed branch; same equations, new Cauchy data."""
    return evolve(ZA0, Delta2A0, m, times)


def lambda_flow(lambda0, m: QuadraticModel, times, Delta2=None, S0: float = 0.0,
                phase: str = "linear") -> LambdaTrajectory:
    """Shift ``lam' = J (Hzz + kt Wzz) lam`` and its recentring phase.

    ``phase="linear"`` integrates ``<lam_p, lam_u'> - 1/2 <lam, M lam>``, the
    phase under which the recentred state solves the linear equation.
    ``phase="mean-field"`` instead uses
    ``1/2 <lam, [Hzz + kt(Wzz + 2Wzw + Www)] lam> + kt/2 tr(Www Delta2)``
    as the Hamiltonian term (needs ``Delta2`` on the grid).
    """
    times = check_times(times)
    lam0 = np.asarray(lambda0, dtype=float)
    n = m.n
    c = _Coefficients(m, times)
    A0, Am, A1 = c.stages(c.JM)
    R = _rk4_transfer(A0, Am, A1, c.h)
    lam = _chain(R, lam0)
    if times.size == 1:
        return LambdaTrajectory(times, lam, np.array([S0]))
    ops = [lambda y, A=A: A @ y for A in (A0, Am, A1)]
    st = _stage_values(ops, lam[:-1, :, None], c.h)
    which = (0, 1, 1, 2)
    if phase == "linear":
        Hs = c.stages(c.M)
        trace_terms = None
    elif phase == "mean-field":
        if Delta2 is None:
            raise ValueError("mean-field phase needs Delta2 on the grid")
        D = np.asarray(Delta2, dtype=float)
        Hs = c.stages(c.K)
        Wws = c.stages(lambda cc: cc["Www"])
        Bs = c.stages(c.JM)
        dst = _stage_values([lambda y, B=B: B @ y + y @ np.swapaxes(B, 1, 2) for B in Bs],
                            D[:-1], c.h)
        trace_terms = [0.5 * m.kappa_tilde * np.einsum("tij,tji->t", Wws[which[s]], dst[s])
                       for s in range(4)]
    else:
        raise ValueError(f"unknown phase convention {phase!r}")
    g = []
    for s in range(4):
        k = which[s]
        y = st[s]
        ydot = ((A0, Am, A1)[k] @ y)[:, :, 0]
        z = y[:, :, 0]
        val = np.einsum("ti,ti->t", z[:, :n], ydot[:, n:]) \
            - 0.5 * np.einsum("ti,tij,tj->t", z, Hs[k], z)
        if trace_terms is not None:
            val = val - trace_terms[s]
        g.append(val)
    return LambdaTrajectory(times, lam, _rk4_quadrature(g, c.h, S0))


def step_halving_error(Z0, Delta2_0, m: QuadraticModel, times) -> float:
    """Max node difference between the given grid and its bisection (diagnostic)."""
    times = check_times(times)
    fine = np.empty(2 * times.size - 1)
    fine[0::2] = times
    fine[1::2] = times[:-1] + 0.5 * np.diff(times)
    a = evolve(Z0, Delta2_0, m, times)
    b = evolve(Z0, Delta2_0, m, fine)
    return float(max(np.abs(a.Z - b.Z[0::2]).max(), np.abs(a.Delta2 - b.Delta2[0::2]).max(),
                     np.abs(a.S - b.S[0::2]).max()))


def metaplectic_flow(m: QuadraticModel, times):
    """Flow ``Lambda`` of ``M = Hzz + kt Wzz`` and the center-phase matrix ``Theta``.

    For a packet centred at ``z0`` the accumulated phase
    ``int <p, q'> - 1/2 <z, M z> dt`` along ``z = Lambda z0`` equals
    ``z0 @ Theta @ z0``.
    """
    times = check_times(times)
    c = _Coefficients(m, times)
    L, _ = _flow(c)
    n = m.n
    if times.size == 1:
        return L, np.zeros_like(L)
    Ep = np.zeros((2 * n, 2 * n))
    Ep[:n, :n] = np.eye(n)

    def phase_matrix(cc):
        M = c.M(cc)
        return 0.5 * (Ep @ M + M @ Ep) - 0.5 * M

    A = c.stages(c.JM)
    Ks = c.stages(phase_matrix)
    st = _stage_values([lambda y, B=B: B @ y for B in A], L[:-1], c.h)
    which = (0, 1, 1, 2)
    g = [np.swapaxes(st[s], 1, 2) @ Ks[which[s]] @ st[s] for s in range(4)]
    h = c.h[:, None, None]
    inc = h / 6.0 * (g[0] + 2.0 * g[1] + 2.0 * g[2] + g[3])
    Theta = np.concatenate([np.zeros((1, 2 * n, 2 * n)), np.cumsum(inc, axis=0)])
    return L, Theta
