"""Forced periodic Stokes problem and the composed solution operator.

``v = v1 + v2``: ``v1`` answers the projected forcing without any flux
constraint (diagonal in the eigenbasis), ``v2`` is the flux-driven solution
for the corrected flux ``g - flux(v1)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import IncompatibleField, InvalidParameter
from .fields import VectorField, operators
from .harmonic import (
    FluxSignal,
    HarmonicSolution,
    flux_profile,
    galerkin_residual,
    recover_psi,
    solve_periodic_stokes,
)

__all__ = [
    "ForcingCoefficients",
    "forcing_coeffs",
    "forcing_from_table",
    "solve_forced_stokes",
    "flux_correction",
    "flux_deviation",
    "solve_T",
]


@dataclass(frozen=True)
class ForcingCoefficients:
    """``(f(t), w_j)`` as Fourier tables ``cos`` and ``sin`` of shape ``(K_f+1, m)``.

    ``tail`` is the fraction of sampled energy dropped by truncating to ``K_f``;
    ``f_e`` holds the matching Fourier data of ``(f(t), e)``.
    """

    T: float
    cos: np.ndarray
    sin: np.ndarray
    f_e_cos: np.ndarray
    f_e_sin: np.ndarray
    tail: float = 0.0

    @property
    def K(self):
        return self.cos.shape[0] - 1

    @property
    def m(self):
        return self.cos.shape[1]

    def is_zero(self):
        return not (np.any(self.cos) or np.any(self.sin))


def _as_full_rows(grid, f_samples):
    ops = operators(grid)
    rows = []
    for f in f_samples:
        if isinstance(f, VectorField):
            if f.grid is not grid:
                raise IncompatibleField("forcing sample lives on a different grid")
            rows.append(f.flat())
        else:
            a = np.asarray(f, dtype=float).ravel()
            if a.size == ops.n_full:
                rows.append(a)
            elif a.size == ops.n_I:
                full = np.zeros(ops.n_full)
                full[ops.idx_I] = a
                rows.append(full)
            else:
                raise IncompatibleField(f"forcing sample has {a.size} entries")
    return np.array(rows)


def _time_fourier(vals, K):
    """Real Fourier tables of ``vals`` (time along axis 0) truncated to ``K``."""
    N = vals.shape[0]
    c = np.fft.rfft(vals, axis=0) / N
    cos = 2 * c.real
    sin = -2 * c.imag
    cos[0] = c[0].real
    sin[0] = 0.0
    energy = np.sum(vals**2) / N
    kept = np.sum(cos[0] ** 2) + 0.5 * (np.sum(cos[1 : K + 1] ** 2) + np.sum(sin[1 : K + 1] ** 2))
    tail = float(max(energy - kept, 0.0) / energy) if energy > 0 else 0.0
    return cos[: K + 1].copy(), sin[: K + 1].copy(), tail


def forcing_coeffs(grid, basis, f_samples, T=1.0, K=None):
    """Project time samples ``f(i T/N)`` onto the eigenfields and Fourier-analyse.

    ``K`` defaults to ``N // 4``; ``N >= 4 K`` is required.
    """
    ops = operators(grid)
    F = _as_full_rows(grid, f_samples)
    N = F.shape[0]
    if not T > 0:
        raise InvalidParameter("T must be positive")
    K = N // 4 if K is None else int(K)
    if K < 0 or N < max(4 * K, 1):
        raise InvalidParameter(f"{N} forcing samples cannot resolve K={K} harmonics")
    W = np.zeros((ops.n_full, basis.m + 1))
    W[ops.idx_I, :-1] = basis.vectors
    W[ops.idx_I, -1] = basis.e_vec
    proj = F @ (ops.M @ W)
    cos, sin, tail = _time_fourier(proj, K)
    return ForcingCoefficients(float(T), cos[:, :-1], sin[:, :-1], cos[:, -1], sin[:, -1], tail)


def forcing_from_table(basis, T, cos, sin=None, f_e_cos=None, f_e_sin=None):
    """Build coefficients directly from ``(f, w_j)`` Fourier tables."""
    cos = np.atleast_2d(np.asarray(cos, dtype=float))
    sin = np.zeros_like(cos) if sin is None else np.atleast_2d(np.asarray(sin, dtype=float))
    if cos.shape != sin.shape or cos.shape[1] != basis.m:
        raise InvalidParameter("forcing tables must have shape (K+1, m)")
    K = cos.shape[0] - 1
    fe_c = np.zeros(K + 1) if f_e_cos is None else np.asarray(f_e_cos, float)
    fe_s = np.zeros(K + 1) if f_e_sin is None else np.asarray(f_e_sin, float)
    return ForcingCoefficients(float(T), cos, sin, fe_c, fe_s)


def solve_forced_stokes(basis, coeffs, nu, T=None):
    """Unconstrained forced response ``v1' + nu A v1 = P f`` (diagonal solve)."""
    if not nu > 0:
        raise InvalidParameter("nu must be positive")
    T = coeffs.T if T is None else float(T)
    lam = basis.eigenvalues
    K = coeffs.K
    om = 2 * np.pi * np.arange(K + 1)[:, None] / T
    d = nu * lam[None, :]
    det = d * d + om * om
    a = (d * coeffs.cos - om * coeffs.sin) / det
    b = (om * coeffs.cos + d * coeffs.sin) / det
    b[0] = 0.0
    cos_coef = np.hstack([np.zeros((K + 1, 1)), a])
    sin_coef = np.hstack([np.zeros((K + 1, 1)), b])
    r1 = om * b + d * a - coeffs.cos
    r2 = -om * a + d * b - coeffs.sin
    r2[0] = 0.0
    ref = max(np.max(np.abs(coeffs.cos)), np.max(np.abs(coeffs.sin)), 1e-300)
    resid = float(max(np.max(np.abs(r1)), np.max(np.abs(r2))) / ref)
    return HarmonicSolution(
        basis, T, float(nu), basis.grid.L, cos_coef, sin_coef, 0.0,
        meta={"residual": resid},
    )


def flux_correction(grid, v1_solution, flux):
    """``g~ = g - flux(v1)`` with the flux of ``v1`` taken through ``e``."""
    b = v1_solution.basis
    L = grid.L
    fc = b.coef_flux(v1_solution.cos_coef) * b.Pe_z_norm / L
    fs = b.coef_flux(v1_solution.sin_coef) * b.Pe_z_norm / L
    K = max(flux.K, v1_solution.K, 1)
    g = flux.with_K(K)
    fc = np.pad(fc, (0, K + 1 - len(fc)))
    fs = np.pad(fs, (0, K + 1 - len(fs)))
    return FluxSignal(g.T, g.p0 - fc[0], g.p - fc[1:], g.q - fs[1:])


def flux_deviation(v_solution, n_times=8):
    """Largest relative spread of row fluxes across ``z`` over sample times."""
    grid = v_solution.grid
    worst = 0.0
    for t in v_solution.sample_times(n_times):
        f = VectorField.from_interior(grid, v_solution.interior_at(t))
        prof = flux_profile(grid, f)
        ref = max(abs(prof.mean), 1e-300)
        worst = max(worst, prof.max_deviation / ref if prof.mean != 0 else prof.max_deviation)
    return worst


def solve_T(grid, basis, f, flux, nu):
    """``v = T f``: forced flow with prescribed flux ``g``.

    ``f`` is a :class:`ForcingCoefficients` or a sequence of time samples.
    The result carries ``meta['psi']``, ``meta['residual']`` (Galerkin
    momentum residual) and the intermediate flux correction.
    """
    if not isinstance(f, ForcingCoefficients):
        f = forcing_coeffs(grid, basis, f, T=flux.T)
    if abs(f.T - flux.T) > 1e-12 * flux.T:
        raise InvalidParameter("forcing and flux have different periods")
    v1 = solve_forced_stokes(basis, f, nu, flux.T)
    g_tilde = flux_correction(grid, v1, flux)
    v2 = solve_periodic_stokes(grid, basis, g_tilde, nu)
    K = max(v1.K, v2.K)
    pad = lambda a: np.pad(a, ((0, K + 1 - a.shape[0]), (0, 0)))  # noqa: E731
    psi = recover_psi(v2, g_tilde, nu)
    v = HarmonicSolution(
        basis, float(flux.T), float(nu), grid.L,
        pad(v1.cos_coef) + pad(v2.cos_coef),
        pad(v1.sin_coef) + pad(v2.sin_coef),
        v2.c_tilde, flux.with_K(K), v2.modes,
    )
    res = galerkin_residual(v, psi=_pad_psi(psi, K), forcing=(f.cos, f.sin))
    v.meta.update(
        psi=_pad_psi(psi, K), residual=res, g_tilde=g_tilde, v1=v1, forced_residual=v1.meta["residual"]
    )
    return v


def _pad_psi(psi, K):
    return {k: np.pad(v, (0, K + 1 - len(v))) for k, v in psi.items() if k in ("cos", "sin")}
