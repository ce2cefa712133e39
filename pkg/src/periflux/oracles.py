"""Independent reference solutions and cross-checks.

The radial oracle uses its own 1-D grid and stencils.  The time stepper
reuses the grid operators but not the eigenbasis, so it checks the spectral
pipeline end to end.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded
from scipy.sparse import diags
from scipy.sparse.linalg import splu

from .exceptions import IncompatibleField, InvalidOracleUse, InvalidParameter, OracleNonconvergence
from .fields import VectorField, operators, unit_axial_field
from .geometry import GeometryKind

__all__ = [
    "RadialOracleResult",
    "womersley_radial",
    "womersley_for_grid",
    "poiseuille_profile",
    "TimeSeries",
    "timestep_periodic",
    "period_map_contraction",
    "SwirlReport",
    "swirl_decay_check",
    "DiffReport",
    "compare",
    "compare_series",
]


def poiseuille_profile(kind, r0, flux, nu=1.0):
    """Closed-form steady profile for a physical section flux; returns ``(v(r), drive)``."""
    if GeometryKind.parse(kind) is GeometryKind.AXISYM:
        amp = 2.0 * flux / (np.pi * r0**4)
        drive = 4.0 * nu * amp
    else:
        amp = 3.0 * flux / (4.0 * r0**3)
        drive = 2.0 * nu * amp
    return (lambda r: amp * (r0**2 - np.asarray(r) ** 2)), drive


@dataclass(frozen=True)
class RadialOracleResult:
    """Complex profiles ``V_k(r)`` with ``v(r, t) = Re sum_k V_k(r) exp(i omega_k t)``."""

    kind: GeometryKind
    r0: float
    T: float
    r: np.ndarray
    profiles: np.ndarray
    drive: np.ndarray
    flux_error: float

    @property
    def K(self):
        return self.profiles.shape[0] - 1

    def at(self, r, t):
        r = np.abs(np.asarray(r, dtype=float))
        om = 2 * np.pi * np.arange(self.K + 1) / self.T
        phase = np.exp(1j * om * t)
        return np.interp(r, self.r, (phase @ self.profiles).real)

    def to_field(self, grid, t, scale=1.0):
        """Axial field sampled on ``grid`` (transverse components zero)."""
        x = np.outer(grid.xi_c, grid.r_f)
        w = scale * self.at(x, t)
        return VectorField(grid, np.zeros((grid.n_xi + 1, grid.n_zeta)), w,
                           np.zeros_like(w) if grid.axisym else None)

    def boundary_layer_thickness(self, k, frac=0.5):
        """Distance from the wall at which ``|V_k - V_k(0)|`` falls to ``frac`` of its wall value."""
        prof = self.profiles[k]
        dev = np.abs(prof - prof[0])
        wall = dev[-1]
        inside = np.nonzero(dev <= frac * wall)[0]
        if len(inside) == 0:
            return self.r0
        i = inside[-1]
        if i + 1 >= len(self.r):
            return 0.0
        r_cross = np.interp(frac * wall, [dev[i], dev[i + 1]], [self.r[i], self.r[i + 1]])
        return float(self.r0 - r_cross)


def _radial_solve(kind, r0, nu, omega, Nr):
    """Solve ``i omega u - nu Lap_r u = 1`` on ``[0, r0]`` with ``u(r0) = 0``."""
    h = r0 / Nr
    r = np.linspace(0.0, r0, Nr + 1)
    n = Nr  # unknowns at r_0..r_{Nr-1}
    ab = np.zeros((3, n), dtype=complex)
    diag = np.full(n, 1j * omega + 2 * nu / h**2, dtype=complex)
    lower = np.full(n, -nu / h**2, dtype=complex)  # coefficient of u_{i-1}
    upper = np.full(n, -nu / h**2, dtype=complex)  # coefficient of u_{i+1}
    if kind is GeometryKind.AXISYM:
        ri = r[1:n]
        lower[1:] += nu / (2 * h * ri)
        upper[1:] -= nu / (2 * h * ri)
        diag[0] = 1j * omega + 4 * nu / h**2
        upper[0] = -4 * nu / h**2
    else:
        upper[0] = -2 * nu / h**2
    ab[0, 1:] = upper[:-1]
    ab[1] = diag
    ab[2, :-1] = lower[1:]
    u = solve_banded((1, 1), ab, np.ones(n, dtype=complex))
    return r, np.concatenate([u, [0.0]])


def _radial_flux(kind, r, u):
    if kind is GeometryKind.AXISYM:
        return np.trapezoid(2 * np.pi * r * u, r)
    return 2.0 * np.trapezoid(u, r)


def womersley_radial(geometry_kind, r0, nu, T, flux, Nr=1024, profile=None):
    """Per-harmonic radial solutions realising a physical flux signal."""
    kind = GeometryKind.parse(geometry_kind)
    if profile is not None and not profile.is_straight:
        raise InvalidOracleUse("the radial oracle needs a straight pipe")
    if Nr < 256:
        raise InvalidParameter("Nr must be at least 256")
    if not (nu > 0 and T > 0 and r0 > 0):
        raise InvalidParameter("nu, T and r0 must be positive")
    targets = np.concatenate([[flux.p0], flux.p - 1j * flux.q])
    profiles, drive = [], []
    err = 0.0
    r = None
    for k, G in enumerate(targets):
        r, u = _radial_solve(kind, r0, nu, 2 * np.pi * k / T, Nr)
        q = _radial_flux(kind, r, u)
        P = G / q
        prof = P * u
        profiles.append(prof)
        drive.append(P)
        err = max(err, abs(_radial_flux(kind, r, prof) - G) / max(abs(G), 1e-300) if G != 0 else 0.0)
    return RadialOracleResult(kind, float(r0), float(T), r, np.array(profiles), np.array(drive), float(err))


def womersley_for_grid(grid, flux, nu, Nr=1024):
    """Radial oracle for a straight grid with ``flux`` in normalised units."""
    prof = grid.profile
    if not prof.is_straight:
        raise InvalidOracleUse("the radial oracle needs a straight pipe")
    return womersley_radial(grid.kind, prof.r0, nu, flux.T, flux.scaled(grid.measure_raw), Nr)


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """One converged period of interior states at ``times`` (``n_steps`` per period)."""

    grid: object
    T: float
    times: np.ndarray
    states: np.ndarray
    psi: np.ndarray
    periods: int
    gap: float
    gaps: tuple = ()
    meta: dict = field(default_factory=dict)

    def field(self, i):
        return VectorField.from_interior(self.grid, self.states[i])


def _axial_rhs(ops, grid):
    e_full = unit_axial_field(grid).flat()
    return (ops.M @ e_full)[ops.idx_I], e_full


def _m_norm(ops, x):
    return float(np.sqrt(max(x @ (ops.M_II @ x), 0.0)))


def timestep_periodic(grid, flux, nu, dt, max_periods=50, tol=1e-10, v0=None):
    """Crank-Nicolson stepping with the flux fixed each step by the axial drive.

    ``psi`` enters as ``psi (e_z, .)``; by linearity each step is
    ``v0 + psi v1`` with one extra pre-computed solve.
    """
    if not nu > 0:
        raise InvalidParameter("nu must be positive")
    T = flux.T
    n_steps = int(round(T / dt))
    if n_steps < 1 or abs(n_steps * dt - T) > 1e-9 * T:
        raise InvalidParameter("dt must divide the period")
    if dt > T / (64 * max(flux.K, 1)) * (1 + 1e-12):
        raise InvalidParameter("dt must not exceed T / (64 K)")
    ops = operators(grid)
    L = grid.L
    key = ("cn", float(dt), float(nu))
    A_builder = lambda: ops.M_II / dt + 0.5 * nu * ops.K  # noqa: E731
    B = ops.M_II / dt - 0.5 * nu * ops.K
    f_e, _ = _axial_rhs(ops, grid)
    v1, _ = ops.saddle_solve(key, A_builder, f_e)
    flux_of = lambda x: (x @ f_e) / L  # noqa: E731
    s1 = flux_of(v1)
    v = np.zeros(ops.n_I) if v0 is None else np.asarray(v0, dtype=float).copy()
    times = np.arange(n_steps) * dt
    gaps = []
    for period in range(1, max_periods + 1):
        states = np.empty((n_steps, ops.n_I))
        psis = np.empty(n_steps)
        start = v.copy()
        for i in range(n_steps):
            states[i] = v
            vp, _ = ops.saddle_solve(key, A_builder, B @ v)
            psi = (flux(times[i] + dt) - flux_of(vp)) / s1
            v = vp + psi * v1
            psis[i] = psi
        ref = max(_m_norm(ops, v), 1e-300)
        gap = _m_norm(ops, v - start) / ref
        if _m_norm(ops, v) == 0.0:
            gap = 0.0
        gaps.append(gap)
        if gap <= tol:
            return TimeSeries(grid, T, times, states, psis, period, gap, tuple(gaps))
    raise OracleNonconvergence(f"time stepper not periodic after {max_periods} periods (gap {gap:.3e})")


def period_map_contraction(grid, nu, T, dt, iters=2, smoothing=30, seed=0):
    """Decay factor of the slowest mode under the homogeneous Crank-Nicolson period map.

    Crank-Nicolson damps very stiff modes only weakly (factor near -1), so
    plain power iteration locks onto them.  The start vector is smoothed by
    repeated Stokes solves and only a few periods are applied, which keeps
    the measurement on the slowest physical mode.
    """
    ops = operators(grid)
    n_steps = int(round(T / dt))
    key = ("cn", float(dt), float(nu))
    A_builder = lambda: ops.M_II / dt + 0.5 * nu * ops.K  # noqa: E731
    B = ops.M_II / dt - 0.5 * nu * ops.K
    rng = np.random.default_rng(seed)
    v, _ = ops.project_int(ops.M_II @ rng.standard_normal(ops.n_I))
    for _ in range(smoothing):
        v, _ = ops.stokes_int(ops.M_II @ v)
        v /= _m_norm(ops, v)
    rho = 0.0
    for _ in range(iters):
        for _ in range(n_steps):
            v, _ = ops.saddle_solve(key, A_builder, B @ v)
        rho = _m_norm(ops, v)
        v /= rho
    return float(rho)


@dataclass(frozen=True)
class SwirlReport:
    steps: int
    energies: np.ndarray
    monotone: bool
    midpoint_balance: float
    trapezoid_balance: float
    final_ratio: float

    def to_dict(self):
        return {
            "steps": self.steps,
            "monotone": self.monotone,
            "midpoint_balance": self.midpoint_balance,
            "trapezoid_balance": self.trapezoid_balance,
            "final_ratio": self.final_ratio,
        }


def swirl_decay_check(grid, theta0, nu, dt, periods=1.0, T=1.0, stop_ratio=None):
    """Crank-Nicolson evolution of the swirl equation with an energy audit.

    The balance ``E_{n+1} - E_n + 2 nu dt D`` is reported relative to
    ``E_n`` with ``D`` the dissipation at the midpoint (exact for this
    scheme) and at the trapezoid average (an ``O(dt^2)`` surrogate of the
    continuous identity).
    """
    if not grid.axisym:
        raise InvalidParameter("swirl evolution needs an axisymmetric grid")
    if not (nu > 0 and dt > 0):
        raise InvalidParameter("nu and dt must be positive")
    ops = operators(grid)
    th = np.arange(ops.n_I - ops.n_t, ops.n_I)
    K = ops.K[th][:, th].tocsc()
    mw = ops.M_II.diagonal()[th]
    theta = np.asarray(theta0, dtype=float).ravel().copy()
    if theta.size != ops.n_t:
        raise IncompatibleField("swirl field must live on the axial-face lattice")
    lhs = splu((diags(mw / dt) + 0.5 * nu * K).tocsc())
    rhs_op = diags(mw / dt) - 0.5 * nu * K
    n = int(round(periods * T / dt))
    energy = lambda x: float(x @ (mw * x))  # noqa: E731
    diss = lambda x: float(x @ (K @ x))  # noqa: E731
    E = [energy(theta)]
    mid_err = trap_err = 0.0
    for _ in range(n):
        new = lhs.solve(rhs_op @ theta)
        E_new = energy(new)
        ref = max(E[-1], 1e-300)
        if E[-1] > 0:
            mid = E_new - E[-1] + 2 * nu * dt * diss(0.5 * (theta + new))
            trap = E_new - E[-1] + nu * dt * (diss(theta) + diss(new))
            mid_err = max(mid_err, abs(mid) / ref)
            trap_err = max(trap_err, abs(trap) / ref)
        theta = new
        E.append(E_new)
        if stop_ratio is not None and E[0] > 0 and E_new <= stop_ratio * E[0]:
            break
    E = np.array(E)
    monotone = bool(np.all(np.diff(E) <= 1e-15 * E[0])) if E[0] > 0 else bool(np.all(E == 0))
    return SwirlReport(len(E) - 1, E, monotone, mid_err, trap_err, float(E[-1] / E[0]) if E[0] > 0 else 0.0)


@dataclass(frozen=True)
class DiffReport:
    rel_l2: float
    rel_max: float
    rel_flux: float

    def to_dict(self):
        return {"rel_l2": self.rel_l2, "rel_max": self.rel_max, "rel_flux": self.rel_flux}


def _rel(num, den):
    if den == 0:
        return 0.0 if num == 0 else float("inf")
    return float(num / den)


def compare(a, b):
    """Relative differences of ``a`` against reference ``b`` (same grid)."""
    if a.grid is not b.grid:
        raise IncompatibleField("fields live on different grids")
    grid = a.grid
    ops = operators(grid)
    d = a.flat() - b.flat()
    bf = b.flat()
    l2 = _rel(np.sqrt(max(d @ (ops.M @ d), 0.0)), np.sqrt(max(bf @ (ops.M @ bf), 0.0)))
    mx = _rel(np.max(np.abs(d)), np.max(np.abs(bf)))
    fa = np.sum(ops.flux_z * a.w, axis=0)
    fb = np.sum(ops.flux_z * b.w, axis=0)
    fl = _rel(np.max(np.abs(fa - fb)), np.max(np.abs(fb)))
    return DiffReport(l2, mx, fl)


def compare_series(grid, fields_a, fields_b):
    """Relative weighted L2-in-space-time difference of two sampled histories."""
    ops = operators(grid)
    num = den = 0.0
    for a, b in zip(fields_a, fields_b):
        fa = a.flat() if isinstance(a, VectorField) else _embed(ops, a)
        fb = b.flat() if isinstance(b, VectorField) else _embed(ops, b)
        d = fa - fb
        num += d @ (ops.M @ d)
        den += fb @ (ops.M @ fb)
    return _rel(np.sqrt(max(num, 0.0)), np.sqrt(max(den, 0.0)))


def _embed(ops, x):
    full = np.zeros(ops.n_full)
    full[ops.idx_I] = x
    return full
