"""Navier-Stokes by Picard iteration of ``w -> T(-w . grad w)``."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DivergenceDetected, IncompatibleField, InvalidParameter, MaxitExceeded
from .fields import VectorField, operators
from .forcing import forcing_coeffs, solve_T
from .harmonic import HarmonicSolution, galerkin_residual, time_norms, zero_solution

__all__ = [
    "convective_term",
    "PicardState",
    "NSReport",
    "combined_norm",
    "picard_step",
    "solve_ns",
]


def _ghost_pad(a, lo, hi):
    """Pad a cell-centred array along xi with one ghost row on each side.

    ``lo``/``hi``: ``"wall"`` (zero wall value, quadratic extrapolation),
    ``"even"`` or ``"odd"`` (mirror about the axis).
    """
    out = np.empty((a.shape[0] + 2, a.shape[1]))
    out[1:-1] = a
    for side, kind in ((0, lo), (-1, hi)):
        first, second = (a[0], a[1]) if side == 0 else (a[-1], a[-2])
        if kind == "wall":
            g = -2.0 * first + second / 3.0
        elif kind == "even":
            g = first
        else:
            g = -first
        out[side] = g
    return out


def _dz(a, dz):
    return (np.roll(a, -1, axis=1) - np.roll(a, 1, axis=1)) / (2 * dz)


def convective_term(grid, u):
    """``(u . grad) u`` returned in stored form (caller negates).

    Components are evaluated in physical variables with the mapped
    derivative ``u . grad = (U / r) d_xi + v_z d_zeta``: the transverse
    component on xi-faces, axial and swirl on zeta-faces.  Axisymmetric grids
    add ``-v_theta^2 / rho`` and ``+v_rho v_theta / rho``.
    """
    if u.grid is not grid:
        raise IncompatibleField("field lives on a different grid")
    g = grid
    ops = operators(g)
    nx = g.n_xi
    dxi, dz = g.dxi, g.dzeta
    U = u.u.copy()
    U[0] = 0.0
    U[-1] = 0.0
    W = u.w
    vt = (ops.R @ np.concatenate([U.ravel(), u.flat()[ops.n_u :]])).reshape(nx + 1, g.n_zeta)
    vt[0] = 0.0
    vt[-1] = 0.0
    lo = "even" if g.axisym else "wall"

    # transverse component on interior xi-faces
    Wbar = np.zeros_like(U)
    Wbar[1:-1] = 0.25 * (W[:-1] + W[1:] + np.roll(W[:-1], -1, 1) + np.roll(W[1:], -1, 1))
    f_t = np.zeros_like(U)
    dvt_dxi = (vt[2:] - vt[:-2]) / (2 * dxi)
    f_t[1:-1] = U[1:-1] / g.r_c[None, :] * dvt_dxi + Wbar[1:-1] * _dz(vt, dz)[1:-1]

    # axial component on zeta-faces
    Ubar = 0.25 * (U[:-1] + U[1:] + np.roll(U[:-1], 1, 1) + np.roll(U[1:], 1, 1))
    Wp = _ghost_pad(W, lo, "wall")
    f_z = Ubar / g.r_f[None, :] * (Wp[2:] - Wp[:-2]) / (2 * dxi) + W * _dz(W, dz)

    f_th = None
    if g.axisym:
        th = u.theta
        rho_w = np.outer(g.xi_c, g.r_f)
        vr = 0.25 * (vt[:-1] + vt[1:] + np.roll(vt[:-1], 1, 1) + np.roll(vt[1:], 1, 1))
        Tp = _ghost_pad(th, "odd", "wall")
        f_th = (
            Ubar / g.r_f[None, :] * (Tp[2:] - Tp[:-2]) / (2 * dxi)
            + W * _dz(th, dz)
            + vr * th / rho_w
        )
        thbar = np.zeros_like(U)
        thbar[1:-1] = 0.25 * (th[:-1] + th[1:] + np.roll(th[:-1], -1, 1) + np.roll(th[1:], -1, 1))
        rho_u = np.outer(g.xi_f[1:-1], g.r_c)
        f_t[1:-1] -= thbar[1:-1] ** 2 / rho_u

    # back to stored form: U_f = f_t - xi r' avg(f_z), so that R f = f_t
    zero_u = np.zeros(ops.n_u)
    tail = np.concatenate([f_z.ravel(), f_th.ravel() if f_th is not None else []])
    tilt = (ops.R @ np.concatenate([zero_u, tail])).reshape(nx + 1, g.n_zeta)
    return VectorField(g, f_t - tilt, f_z, f_th)


def combined_norm(solution, n_times=None):
    """``max_t ||w||_V + ||A w||_{L^2(H)}`` over one period."""
    nrm = time_norms(solution, n_times)
    return float(np.sqrt(max(nrm["V_max_sq"], 0.0)) + np.sqrt(max(nrm["A_L2_sq"], 0.0)))


def _difference(a, b):
    K = max(a.K, b.K)
    pad = lambda x: np.pad(x, ((0, K + 1 - x.shape[0]), (0, 0)))  # noqa: E731
    return HarmonicSolution(
        a.basis, a.T, a.nu, a.L, pad(a.cos_coef) - pad(b.cos_coef),
        pad(a.sin_coef) - pad(b.sin_coef), a.c_tilde - b.c_tilde,
    )


@dataclass(frozen=True, eq=False)
class PicardState:
    n: int
    solution: HarmonicSolution
    increments: tuple = ()
    ratios: tuple = ()
    norms: tuple = ()
    delta: float | None = None
    c_nu_est: float = 0.0
    tails: tuple = ()
    n_samples: int = 0

    @property
    def increment(self):
        return self.increments[-1] if self.increments else float("inf")


def _forcing_of(grid, basis, w, K):
    rows = []
    for t in w.sample_times(4 * K):
        field_t = VectorField.from_interior(grid, w.interior_at(t))
        rows.append(-convective_term(grid, field_t).flat())
    return forcing_coeffs(grid, basis, rows, T=w.T, K=K)


def picard_step(grid, basis, state, flux, nu):
    """One application of the Picard map; returns a new state."""
    K = max(flux.K, 1)
    w = state.solution
    f = _forcing_of(grid, basis, w, K)
    w_new = solve_T(grid, basis, f, flux, nu)
    nrm = combined_norm(w_new)
    inc = combined_norm(_difference(w_new, w))
    delta = state.delta
    if delta is None:
        delta = 2.0 * nrm
    if not np.isfinite(nrm) or (delta > 0 and nrm > 1e3 * delta):
        raise DivergenceDetected(
            f"Picard iterate norm {nrm:.3e} left the ball of radius {delta:.3e}; "
            "reduce the flux amplitude or increase nu"
        )
    ratios = state.ratios
    if state.increments and state.increments[-1] > 0:
        ratios = ratios + (inc / state.increments[-1],)
    c_est = state.c_nu_est
    if delta > 0:
        g_h1 = flux.h1_norm()
        c_est = max(c_est, nrm / (delta**2 + g_h1))
        if len(ratios) > len(state.ratios):
            c_est = max(c_est, ratios[-1] / delta)
    return PicardState(
        state.n + 1, w_new, state.increments + (inc,), ratios, state.norms + (nrm,),
        delta, c_est, state.tails + (f.tail,), 4 * K,
    )


@dataclass(frozen=True)
class NSReport:
    iterations: int
    increments: list
    ratios: list
    q_bar: float
    c_nu_est: float
    delta: float
    g_h1: float
    smallness_holds: bool
    fixed_point_residual: float
    momentum_residual: float
    aliasing_tail: float
    converged: bool = True
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "iterations": self.iterations,
            "increments": list(self.increments),
            "ratios": list(self.ratios),
            "q_bar": self.q_bar,
            "c_nu_est": self.c_nu_est,
            "delta": self.delta,
            "g_h1": self.g_h1,
            "smallness_holds": self.smallness_holds,
            "fixed_point_residual": self.fixed_point_residual,
            "momentum_residual": self.momentum_residual,
            "aliasing_tail": self.aliasing_tail,
            "converged": self.converged,
        }


def solve_ns(grid, basis, flux, nu, tol=1e-10, maxit=50):
    """Picard iteration from ``w0 = 0`` until the relative increment is ``<= tol``."""
    if not tol > 0:
        raise InvalidParameter("tol must be positive")
    if int(maxit) != maxit or maxit < 1:
        raise InvalidParameter("maxit must be a positive integer")
    K = max(flux.K, 1)
    state = PicardState(0, zero_solution(basis, flux.T, nu, grid.L, K))
    converged = False
    while state.n < maxit:
        state = picard_step(grid, basis, state, flux, nu)
        nrm = state.norms[-1]
        if nrm == 0.0 or state.increment <= tol * nrm:
            converged = True
            break
    w = state.solution
    # momentum residual with the forcing of the final iterate itself
    f = _forcing_of(grid, basis, w, K)
    res = galerkin_residual(w, psi=w.meta["psi"], forcing=(f.cos, f.sin))
    q_bar = float(max(state.ratios)) if state.ratios else 0.0
    g_h1 = flux.h1_norm()
    c = state.c_nu_est
    report = NSReport(
        iterations=state.n,
        increments=list(state.increments),
        ratios=list(state.ratios),
        q_bar=q_bar,
        c_nu_est=float(c),
        delta=float(state.delta or 0.0),
        g_h1=float(g_h1),
        smallness_holds=bool(c == 0.0 or g_h1 < 1.0 / (4.0 * c * c)),
        fixed_point_residual=float(state.increment if state.increments else 0.0),
        momentum_residual=float(res),
        aliasing_tail=float(max(state.tails) if state.tails else 0.0),
        converged=converged,
    )
    if not converged:
        raise MaxitExceeded(
            f"Picard iteration stopped after {state.n} steps (increment {state.increment:.3e})"
        )
    return w, report
