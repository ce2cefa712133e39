"""Time-periodic Stokes flow with prescribed flux, solved harmonic by harmonic.

Solutions are stored as coefficient tables over the basis ``[w, w_1, ..., w_m]``
(see :class:`periflux.spectrum.SpectralBasis`): ``cos_coef[k]`` and
``sin_coef[k]`` for ``k = 0..K`` so that

    v(t) = sum_k cos_coef[k] cos(2 pi k t / T) + sin_coef[k] sin(2 pi k t / T).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import InvalidParameter, NotDecomposable
from .fields import VectorField, operators
from .modes import assemble_mode, mode_estimate_check, solve_mode

__all__ = [
    "FluxSignal",
    "HarmonicSolution",
    "FluxProfile",
    "PressureDecomposition",
    "EstimateReport",
    "flux_fourier",
    "flux_from_coefficients",
    "solve_periodic_stokes",
    "evaluate",
    "flux_profile",
    "recover_psi",
    "pressure_decompose",
    "verify_estimates",
    "galerkin_residual",
    "time_norms",
]


@dataclass(frozen=True)
class FluxSignal:
    """``g(t) = p0 + sum p_k cos(2 pi k t/T) + q_k sin(2 pi k t/T)``."""

    T: float
    p0: float
    p: np.ndarray
    q: np.ndarray
    samples: np.ndarray | None = None

    @property
    def K(self):
        return len(self.p)

    def omega(self):
        return 2 * np.pi * np.arange(1, self.K + 1) / self.T

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        ph = np.multiply.outer(t, self.omega())
        return self.p0 + np.cos(ph) @ self.p + np.sin(ph) @ self.q

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        om = self.omega()
        ph = np.multiply.outer(t, om)
        return np.cos(ph) @ (om * self.q) - np.sin(ph) @ (om * self.p)

    def l2_sq(self):
        """``||g||^2`` over one period."""
        return self.T * self.p0**2 + 0.5 * self.T * float(np.sum(self.p**2 + self.q**2))

    def dl2_sq(self):
        """``||g'||^2`` over one period."""
        return 0.5 * self.T * float(np.sum(self.omega() ** 2 * (self.p**2 + self.q**2)))

    def h1_norm(self):
        return float(np.sqrt(self.l2_sq() + self.dl2_sq()))

    def scaled(self, s):
        return FluxSignal(self.T, s * self.p0, s * self.p, s * self.q)

    def __add__(self, other):
        K = max(self.K, other.K)
        pad = lambda a: np.pad(a, (0, K - len(a)))  # noqa: E731
        if self.T != other.T:
            raise InvalidParameter("flux signals have different periods")
        return FluxSignal(
            self.T, self.p0 + other.p0, pad(self.p) + pad(other.p), pad(self.q) + pad(other.q)
        )

    def __sub__(self, other):
        return self + other.scaled(-1.0)

    def with_K(self, K):
        K = int(K)
        p = np.pad(self.p, (0, max(0, K - self.K)))[:K]
        q = np.pad(self.q, (0, max(0, K - self.K)))[:K]
        return FluxSignal(self.T, self.p0, p, q)

    def to_dict(self):
        return {"T": self.T, "p0": self.p0, "p": self.p.tolist(), "q": self.q.tolist()}


def flux_from_coefficients(T, p0, p=(), q=()):
    p = np.atleast_1d(np.asarray(p, dtype=float))
    q = np.atleast_1d(np.asarray(q, dtype=float))
    K = max(len(p), len(q), 1)
    p = np.pad(p, (0, K - len(p)))
    q = np.pad(q, (0, K - len(q)))
    if not T > 0:
        raise InvalidParameter("T must be positive")
    return FluxSignal(float(T), float(p0), p, q)


def flux_fourier(samples, K=None, T=1.0, energy_tol=1e-10):
    """Fourier data of uniformly spaced samples ``g(i T / N)``, ``i < N``.

    Without ``K`` the smallest harmonic count holding ``1 - energy_tol`` of
    the discrete energy is used.
    """
    g = np.asarray(samples, dtype=float).ravel()
    N = len(g)
    if not T > 0:
        raise InvalidParameter("T must be positive")
    c = np.fft.rfft(g) / N
    if K is None:
        energy = np.abs(c) ** 2
        energy[1:] *= 2
        total = energy.sum()
        K = 1
        if total > 0:
            cum = np.cumsum(energy)
            K = max(1, int(np.searchsorted(cum, (1 - energy_tol) * total)))
    K = int(K)
    if K < 1:
        raise InvalidParameter("K must be at least 1")
    if N < 4 * K:
        raise InvalidParameter(f"{N} samples cannot resolve K={K} harmonics (need >= {4 * K})")
    p = 2 * c[1 : K + 1].real
    q = -2 * c[1 : K + 1].imag
    return FluxSignal(float(T), float(c[0].real), p, q, g.copy())


@dataclass(frozen=True, eq=False)
class HarmonicSolution:
    basis: object
    T: float
    nu: float
    L: float
    cos_coef: np.ndarray
    sin_coef: np.ndarray
    c_tilde: float
    flux: FluxSignal | None = None
    modes: tuple = ()
    meta: dict = field(default_factory=dict)

    @property
    def K(self):
        return self.cos_coef.shape[0] - 1

    @property
    def grid(self):
        return self.basis.grid

    def omega(self):
        return 2 * np.pi * np.arange(self.K + 1) / self.T

    def _phase(self, t):
        # reduce to one period first so that t and t + T give identical bits
        frac = np.mod(np.round(np.mod(np.asarray(t, dtype=float) / self.T, 1.0), 13), 1.0)
        return np.multiply.outer(frac, 2 * np.pi * np.arange(self.K + 1))

    def coef_at(self, t):
        """Basis coefficients at time(s) ``t`` (trailing axis of length m+1)."""
        ph = self._phase(t)
        return np.cos(ph) @ self.cos_coef + np.sin(ph) @ self.sin_coef

    def dcoef_at(self, t):
        om = self.omega()
        ph = self._phase(t)
        return np.cos(ph) @ (om[:, None] * self.sin_coef) - np.sin(ph) @ (om[:, None] * self.cos_coef)

    def interior_at(self, t):
        return self.basis.synthesize(self.coef_at(t))

    def sample_times(self, n):
        return np.arange(n) * (self.T / n)

    def __add__(self, other):
        K = max(self.K, other.K)
        return HarmonicSolution(
            self.basis, self.T, self.nu, self.L,
            _pad_rows(self.cos_coef, K) + _pad_rows(other.cos_coef, K),
            _pad_rows(self.sin_coef, K) + _pad_rows(other.sin_coef, K),
            self.c_tilde + other.c_tilde,
            None if self.flux is None or other.flux is None else self.flux + other.flux,
        )

    def scaled(self, s):
        return HarmonicSolution(
            self.basis, self.T, self.nu, self.L, s * self.cos_coef, s * self.sin_coef,
            s * self.c_tilde, None if self.flux is None else self.flux.scaled(s),
        )

    def coefficient_norm(self):
        return float(np.sqrt(np.sum(self.cos_coef**2) + np.sum(self.sin_coef**2)))


def _pad_rows(a, K):
    return np.pad(a, ((0, K + 1 - a.shape[0]), (0, 0)))


def zero_solution(basis, T, nu, L, K=1):
    z = np.zeros((K + 1, basis.m + 1))
    flux = flux_from_coefficients(T, 0.0, np.zeros(K), np.zeros(K))
    return HarmonicSolution(basis, float(T), float(nu), float(L), z, z.copy(), 0.0, flux)


def solve_periodic_stokes(grid, basis, flux, nu, bordered=True):
    """Flux-driven periodic Stokes solution (zero mode plus one system per harmonic)."""
    if basis.grid is not grid:
        raise InvalidParameter("basis was computed on a different grid")
    if not nu > 0:
        raise InvalidParameter("nu must be positive")
    L = grid.L
    K = flux.K
    m = basis.m
    cos_coef = np.zeros((K + 1, m + 1))
    sin_coef = np.zeros((K + 1, m + 1))
    c_tilde = L * flux.p0 / (basis.Pe_z_norm * basis.C1sq)
    cos_coef[0, 0] = c_tilde
    sols = []
    for k in range(1, K + 1):
        pk, qk = flux.p[k - 1], flux.q[k - 1]
        system = assemble_mode(basis, k, nu, flux.T, L, pk, qk)
        if pk == 0 and qk == 0:
            sols.append(None)
            continue
        sol = solve_mode(system, bordered=bordered)
        cos_coef[k] = sol.coef_a
        sin_coef[k] = sol.coef_b
        sols.append((system, sol))
    return HarmonicSolution(
        basis, float(flux.T), float(nu), float(L), cos_coef, sin_coef, float(c_tilde),
        flux, tuple(sols),
    )


def evaluate(solution, t):
    """Grid field at time ``t``."""
    return VectorField.from_interior(solution.grid, solution.interior_at(float(t)))


@dataclass(frozen=True)
class FluxProfile:
    rows: np.ndarray
    mean: float
    max_deviation: float


def flux_profile(grid, field):
    """Cross-section flux of the axial component at every zeta row."""
    ops = operators(grid)
    rows = np.sum(ops.flux_z * field.w, axis=0)
    mean = float(rows.mean())
    return FluxProfile(rows, mean, float(np.max(np.abs(rows - mean))))


def recover_psi(solution, flux=None, nu=None, times=None):
    """Fourier data (and samples) of the axial drive ``psi(t)``.

    ``psi ||P e_z||^2 = L g'(t) + nu (A_H v, e) ||P e_z||``.
    """
    b = solution.basis
    flux = solution.flux if flux is None else flux
    nu = solution.nu if nu is None else nu
    pe = b.Pe_z_norm
    L = solution.L
    K = solution.K
    om = solution.omega()
    fl = flux.with_K(K)
    gp_cos = np.concatenate([[0.0], om[1:] * fl.q])
    gp_sin = np.concatenate([[0.0], -om[1:] * fl.p])
    psi_cos = (L * gp_cos + nu * pe * b.coef_A_e(solution.cos_coef)) / pe**2
    psi_sin = (L * gp_sin + nu * pe * b.coef_A_e(solution.sin_coef)) / pe**2
    psi_sin[0] = 0.0
    out = {"cos": psi_cos, "sin": psi_sin}
    if times is not None:
        ph = np.multiply.outer(np.asarray(times, float), om)
        out["samples"] = np.cos(ph) @ psi_cos + np.sin(ph) @ psi_sin
    return out


def galerkin_residual(solution, psi=None, forcing=None):
    """Momentum residual tested against the eigenfields, per harmonic.

    Returns ``max |(v' + nu A_H v - psi P e_z - P f, w_l)|`` relative to the
    largest term.  ``forcing`` holds ``(cos, sin)`` tables of ``(f, w_l)``
    shaped ``(K+1, m)``.
    """
    b = solution.basis
    psi = recover_psi(solution) if psi is None else psi
    lam = b.eigenvalues
    ch = b.c_hat
    om = solution.omega()[:, None]

    def proj(coef):  # (u, w_l)
        return coef[:, :1] * (ch / lam) + coef[:, 1:]

    def aproj(coef):  # (A u, w_l)
        return coef[:, :1] * ch + lam * coef[:, 1:]

    nu = solution.nu
    pe = b.Pe_z_norm
    C, S = solution.cos_coef, solution.sin_coef
    terms_c = [om * proj(S), nu * aproj(C), -pe * psi["cos"][:, None] * ch]
    terms_s = [-om * proj(C), nu * aproj(S), -pe * psi["sin"][:, None] * ch]
    if forcing is not None:
        fc, fs = forcing
        K = C.shape[0] - 1
        terms_c.append(-_pad_rows(fc, K)[: K + 1])
        terms_s.append(-_pad_rows(fs, K)[: K + 1])
    rc = sum(terms_c)
    rs = sum(terms_s)
    scale = max(max(np.max(np.abs(t)) for t in terms_c + terms_s), 1e-300)
    if scale <= 1e-300:
        return 0.0
    return float(max(np.max(np.abs(rc)), np.max(np.abs(rs))) / scale)


def time_norms(solution, n_times=None):
    """Time norms of a solution via Parseval (max-in-time by sampling)."""
    b = solution.basis
    T = solution.T
    C, S = solution.cos_coef, solution.sin_coef
    om = solution.omega()

    def parseval(fn):
        return T * fn(C[:1])[0] + 0.5 * T * float(np.sum(fn(C[1:]) + fn(S[1:])))

    A_l2 = parseval(b.coef_A_norm_sq)
    V_l2 = parseval(b.coef_energy)
    H_l2 = parseval(b.coef_l2_sq)
    dt_l2 = 0.5 * T * float(np.sum(om[1:] ** 2 * (b.coef_l2_sq(C[1:]) + b.coef_l2_sq(S[1:]))))
    n = n_times or max(64, 8 * solution.K)
    coefs = solution.coef_at(solution.sample_times(n))
    V_max = float(np.max(b.coef_energy(coefs)))
    return {
        "A_L2_sq": float(A_l2),
        "V_L2_sq": float(V_l2),
        "H_L2_sq": float(H_l2),
        "dt_L2_sq": dt_l2,
        "V_max_sq": V_max,
    }


@dataclass(frozen=True)
class EstimateReport:
    ratio_A: float
    ratio_dt: float
    ratio_V: float
    ratio_V_max: float
    norms: dict

    def to_dict(self):
        return {
            "ratio_A": self.ratio_A,
            "ratio_dt": self.ratio_dt,
            "ratio_V": self.ratio_V,
            "ratio_V_max": self.ratio_V_max,
            "norms": self.norms,
        }


def verify_estimates(solution, flux=None, nu=None):
    """Measured constants of the three a-priori estimates (reporting only).

    ``||A v||^2 <= c (||g||^2 + ||g'||^2/nu^2)``,
    ``||v'||^2 <= c (nu^2 ||g||^2 + ||g'||^2)``,
    ``||v||_V^2 <= c ((1+nu) ||g||^2 + (1/nu + 1/nu^2) ||g'||^2)``.
    The max-in-time V norm is reported against the third right side too.
    """
    flux = solution.flux if flux is None else flux
    nu = solution.nu if nu is None else nu
    norms = time_norms(solution)
    g2, dg2 = flux.l2_sq(), flux.dl2_sq()
    rhs1 = g2 + dg2 / nu**2
    rhs2 = nu**2 * g2 + dg2
    rhs3 = (1 + nu) * g2 + (1 / nu + 1 / nu**2) * dg2

    def ratio(a, b):
        return float(a / b) if b > 0 else 0.0

    return EstimateReport(
        ratio(norms["A_L2_sq"], rhs1),
        ratio(norms["dt_L2_sq"], rhs2),
        ratio(norms["V_L2_sq"], rhs3),
        ratio(norms["V_max_sq"], rhs3),
        norms,
    )


@dataclass(frozen=True)
class PressureDecomposition:
    b: float
    p0_gauge: float
    p_tilde: np.ndarray
    zeta: np.ndarray

    def reconstruct(self):
        return -self.b * self.zeta[None, :] + self.p_tilde + self.p0_gauge


def pressure_decompose(p, L, tol=1e-9):
    """Split ``p = -b z + p_tilde`` with ``p_tilde`` periodic in ``z``.

    ``p`` has shape ``(n_x, n_z + 1)`` sampled at ``z_j = j L / n_z`` for
    ``j = 0..n_z`` (both ends of the cell).  The slope ``a_0(x)`` between the
    two ends must be the same on every transverse line.
    """
    p = np.asarray(p, dtype=float)
    if p.ndim != 2 or p.shape[1] < 3:
        raise InvalidParameter("pressure samples must be a 2-D array spanning [0, L]")
    if not L > 0:
        raise InvalidParameter("L must be positive")
    zeta = np.linspace(0.0, L, p.shape[1])
    a0 = (p[:, -1] - p[:, 0]) / L
    spread = float(np.max(a0) - np.min(a0))
    ref = max(1.0, float(np.max(np.abs(p))) / L)
    if spread > tol * ref:
        raise NotDecomposable(f"axial pressure slope varies across the section by {spread:.3e}")
    b = -float(np.mean(a0))
    p_tilde = p + b * zeta[None, :]
    return PressureDecomposition(b, 0.0, p_tilde, zeta)


def estimate_checks(solution):
    """Per-harmonic estimate ratios from the mode module."""
    out = []
    for item in solution.modes:
        if item is None:
            continue
        system, sol = item
        out.append(
            {
                "k": system.k,
                "residual": sol.residual,
                "flux_error_a": abs(sol.flux_a - system.s * system.rhs_p),
                "flux_error_b": abs(sol.flux_b - system.s * system.rhs_q),
                "estimate_ratio": mode_estimate_check(sol, solution.basis, system),
            }
        )
    return out
