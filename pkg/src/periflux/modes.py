"""Per-harmonic coupled systems in eigenbasis coordinates.

For a harmonic ``k`` with frequency ``omega = 2 pi k / T`` and flux pair
``(p, q)`` the Galerkin unknowns ``X = (lam alpha, lam beta)`` solve

    [[nu M, omega Lam^-1], [-omega Lam^-1, nu M]] X = omega s (q c_hat, -p c_hat)

with ``M = I - c_hat c_hat^T`` and ``s = L / ||P e_z||``.  Writing
``Z = X1 + i X2`` folds this into
``(nu M - i omega Lam^-1) Z = omega s (q - i p) c_hat``: a diagonal matrix
plus a rank-one term, solved by Sherman-Morrison.

A truncated eigenbasis cannot represent ``e``, so the plain Galerkin
coefficients miss the prescribed flux by a truncation-sized amount.  The
default solve therefore borders the system: the base flow ``w``
(``A_H w = e``) joins the trial space and ``e`` joins the test space.  The
``e`` rows are exactly the flux identities, and since ``w`` lies in the
kernel of ``u -> A_H u - (A_H u, e) e`` the border only enters through the
time-derivative coupling.  By linearity the bordered solution costs two
Sherman-Morrison solves.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidParameter, SolverFailure
from .fields import operators

__all__ = [
    "ModeSystem",
    "ModeSolution",
    "assemble_mode",
    "solve_mode",
    "solve_mode_dense",
    "dense_matrix",
    "mode_estimate_check",
    "physical_residual",
]


@dataclass(frozen=True)
class ModeSystem:
    k: int
    nu: float
    T: float
    L: float
    Pe_z_norm: float
    c_hat: np.ndarray
    lam: np.ndarray
    rhs_p: float
    rhs_q: float
    C1sq: float = 0.0

    @property
    def omega(self):
        return 2 * np.pi * self.k / self.T

    @property
    def s(self):
        return self.L / self.Pe_z_norm

    @property
    def m(self):
        return len(self.lam)

    def M(self):
        return np.eye(self.m) - np.outer(self.c_hat, self.c_hat)

    def rhs(self):
        w = self.omega * self.s
        return np.concatenate([w * self.rhs_q * self.c_hat, -w * self.rhs_p * self.c_hat])


@dataclass(frozen=True)
class ModeSolution:
    """``a_k = gamma_a w + sum alpha_j w_j`` and likewise ``b_k``."""

    alpha: np.ndarray
    beta: np.ndarray
    gamma_a: float
    gamma_b: float
    residual: float
    flux_a: float
    flux_b: float

    @property
    def coef_a(self):
        return np.concatenate([[self.gamma_a], self.alpha])

    @property
    def coef_b(self):
        return np.concatenate([[self.gamma_b], self.beta])


def assemble_mode(basis, k, nu, T, L, p_k, q_k):
    if int(k) != k or k < 1:
        raise InvalidParameter("harmonic index k must be an integer >= 1")
    if not (nu > 0 and T > 0 and L > 0):
        raise InvalidParameter("nu, T and L must be positive")
    return ModeSystem(
        int(k), float(nu), float(T), float(L), float(basis.Pe_z_norm),
        np.asarray(basis.c_hat, float), np.asarray(basis.eigenvalues, float),
        float(p_k), float(q_k), float(basis.C1sq or 0.0),
    )


def dense_matrix(system, bordered=False):
    """System matrix built entry by entry from ``delta_jl - c_j c_l``.

    With ``bordered=True`` the unknowns are ``(X1, X2, gamma_a, gamma_b)``
    and two flux rows are appended.
    """
    m = system.m
    g = np.empty((m, m))
    for j in range(m):
        for l in range(m):
            g[l, j] = (1.0 if j == l else 0.0) - system.c_hat[j] * system.c_hat[l]
    kin = np.diag(system.omega / system.lam)
    top = np.hstack([system.nu * g, kin])
    bot = np.hstack([-kin, system.nu * g])
    A = np.vstack([top, bot])
    if not bordered:
        return A
    col = system.omega * system.c_hat / system.lam
    B = np.zeros((2 * m + 2, 2 * m + 2))
    B[: 2 * m, : 2 * m] = A
    B[:m, 2 * m + 1] = col
    B[m : 2 * m, 2 * m] = -col
    B[2 * m, :m] = system.c_hat / system.lam
    B[2 * m + 1, m : 2 * m] = system.c_hat / system.lam
    B[2 * m, 2 * m] = system.C1sq
    B[2 * m + 1, 2 * m + 1] = system.C1sq
    return B


def _dense_rhs(system, bordered):
    b = system.rhs()
    if bordered:
        b = np.concatenate([b, [system.s * system.rhs_p, system.s * system.rhs_q]])
    return b


def _finish(system, sol, bordered):
    m = system.m
    A = dense_matrix(system, bordered)
    b = _dense_rhs(system, bordered)
    r = A @ sol - b
    scale = max(np.linalg.norm(b), np.linalg.norm(A, 2) * np.linalg.norm(sol))
    resid = float(np.linalg.norm(r) / scale) if scale > 0 else 0.0
    alpha = sol[:m] / system.lam
    beta = sol[m : 2 * m] / system.lam
    ga, gb = (float(sol[2 * m]), float(sol[2 * m + 1])) if bordered else (0.0, 0.0)
    flux_a = float(alpha @ system.c_hat + ga * system.C1sq)
    flux_b = float(beta @ system.c_hat + gb * system.C1sq)
    return ModeSolution(alpha, beta, ga, gb, resid, flux_a, flux_b)


def _sm_solve(system, rhs):
    """Solve ``(nu (I - c c^T) - i omega Lam^-1) Z = rhs`` by Sherman-Morrison."""
    nu, c = system.nu, system.c_hat
    d = nu - 1j * system.omega / system.lam
    y = rhs / d
    z = c / d
    denom = 1.0 - nu * (c @ z)
    if abs(denom) < 1e-14:
        raise SolverFailure("rank-one update is singular")
    return y + z * (nu * (c @ y) / denom)


def solve_mode(system, bordered=True):
    """Sherman-Morrison solve of one harmonic system.

    ``bordered=False`` returns the plain Galerkin solution of the ``2m``
    system; the default adds the base-flow border so the flux identities
    hold exactly.
    """
    om, s = system.omega, system.s
    c = system.c_hat
    Z0 = _sm_solve(system, om * s * (system.rhs_q - 1j * system.rhs_p) * c)
    if not bordered:
        Z = Z0
        sol = np.concatenate([Z.real, Z.imag])
    else:
        if system.C1sq <= 0:
            raise InvalidParameter("bordered solve needs the base-flow constant C1sq")
        Z1 = _sm_solve(system, 1j * om * c / system.lam)
        target = s * (system.rhs_p + 1j * system.rhs_q)
        den = system.C1sq + (c / system.lam) @ Z1
        if abs(den) < 1e-300:
            raise SolverFailure("bordered mode system is singular")
        G = (target - (c / system.lam) @ Z0) / den
        Z = Z0 + G * Z1
        sol = np.concatenate([Z.real, Z.imag, [G.real, G.imag]])
    if not np.all(np.isfinite(sol)):
        raise SolverFailure("non-finite mode solution")
    return _finish(system, sol, bordered)


def solve_mode_dense(system, bordered=True):
    """Independent dense LU solve of the same system (oracle path)."""
    sol = np.linalg.solve(dense_matrix(system, bordered), _dense_rhs(system, bordered))
    return _finish(system, sol, bordered)


def mode_estimate_check(solution, basis, system):
    """``(||A a||^2 + ||A b||^2) / [(1 + (omega L / (nu ||P e_z||))^2)(p^2 + q^2)]``."""
    data = system.rhs_p**2 + system.rhs_q**2
    if data == 0:
        return 0.0
    lhs = basis.coef_A_norm_sq(solution.coef_a) + basis.coef_A_norm_sq(solution.coef_b)
    fac = 1.0 + (system.omega * system.L / (system.nu * system.Pe_z_norm)) ** 2
    return float(lhs / (fac * data))


def physical_residual(solution, basis, system):
    """Relative grid-space residual of the mode equations using the true ``A_H``.

    Measures Galerkin truncation; reported, not asserted.
    """
    ops = operators(basis.grid)
    e = basis.e_vec
    a = basis.synthesize(solution.coef_a)
    b = basis.synthesize(solution.coef_b)
    Aa, _ = ops.project_int(ops.K @ a)
    Ab, _ = ops.project_int(ops.K @ b)
    Me = ops.M_II @ e
    om, nu, s = system.omega, system.nu, system.s
    r1 = om * b + nu * (Aa - (Aa @ Me) * e) - om * s * system.rhs_q * e
    r2 = -om * a + nu * (Ab - (Ab @ Me) * e) + om * s * system.rhs_p * e

    def nrm(x):
        return float(np.sqrt(max(x @ (ops.M_II @ x), 0.0)))

    ref = om * s * np.hypot(system.rhs_p, system.rhs_q)
    if ref == 0:
        return 0.0
    return float(np.hypot(nrm(r1), nrm(r2)) / ref)
