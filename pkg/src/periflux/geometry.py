"""Periodic pipe cells and the transverse-scaling map onto a fixed rectangle.

A cell of axial length ``L`` with wall radius ``r(z)`` is mapped to the
reference rectangle through ``x = xi * r(zeta)``, ``z = zeta``.  PLANAR2D
channels use ``xi in [-1, 1]``; AXISYM rotation pipes use ``xi in [0, 1]``
with ``rho = xi * r``.  All quadrature weights carry one scalar factor so the
cell measure is exactly 1.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .exceptions import InvalidGeometry, InvalidParameter

__all__ = [
    "GeometryKind",
    "PipeProfile",
    "MappedGrid",
    "make_profile",
    "build_grid",
    "cell_measure",
]

_PERIODIC_TOL = 1e-9


class GeometryKind(str, enum.Enum):
    PLANAR2D = "planar2d"
    AXISYM = "axisym"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise InvalidParameter(f"unknown geometry kind {value!r}") from None


@dataclass(frozen=True, eq=False)
class PipeProfile:
    """Wall radius ``r(z)`` of an ``L``-periodic pipe."""

    kind: str
    r0: float
    eps: float
    L: float
    samples: tuple | None = None
    _coef: np.ndarray | None = field(default=None, repr=False)

    def r(self, z):
        z = np.asarray(z, dtype=float)
        if self.kind == "straight":
            return np.full_like(z, self.r0)
        if self.kind == "sinusoidal":
            return self.r0 * (1.0 + self.eps * np.sin(2 * np.pi * z / self.L))
        return _trig_eval(self._coef, z, self.L, 0)

    def dr(self, z):
        """Analytic derivative ``r'(z)``."""
        z = np.asarray(z, dtype=float)
        if self.kind == "straight":
            return np.zeros_like(z)
        if self.kind == "sinusoidal":
            k = 2 * np.pi / self.L
            return self.r0 * self.eps * k * np.cos(k * z)
        return _trig_eval(self._coef, z, self.L, 1)

    @property
    def is_straight(self):
        if self.kind == "straight":
            return True
        if self.kind == "sinusoidal":
            return self.eps == 0.0
        return bool(np.all(self._coef[1:] == 0.0))

    def to_dict(self):
        out = {"kind": self.kind, "r0": self.r0, "eps": self.eps, "L": self.L}
        if self.samples is not None:
            out["samples"] = [list(s) for s in self.samples]
        return out


def _trig_basis(z, L, n_harm, nyquist):
    k = 2 * np.pi / L
    cols = [np.ones_like(z)]
    for h in range(1, n_harm + 1):
        cols += [np.cos(h * k * z), np.sin(h * k * z)]
    if nyquist:
        cols.append(np.cos((n_harm + 1) * k * z))
    return np.stack(cols, axis=-1)


def _trig_eval(coef, z, L, deriv):
    k = 2 * np.pi / L
    n_terms = len(coef)
    n_harm = (n_terms - 1) // 2
    nyquist = (n_terms - 1) % 2 == 1
    out = np.full_like(z, coef[0] if deriv == 0 else 0.0)
    for h in range(1, n_harm + 1):
        c, s = coef[2 * h - 1], coef[2 * h]
        w = h * k
        if deriv == 0:
            out = out + c * np.cos(w * z) + s * np.sin(w * z)
        else:
            out = out + w * (-c * np.sin(w * z) + s * np.cos(w * z))
    if nyquist:
        w = (n_harm + 1) * k
        c = coef[-1]
        out = out + (c * np.cos(w * z) if deriv == 0 else -c * w * np.sin(w * z))
    return out


def make_profile(kind, r0=1.0, eps=0.0, L=1.0, samples=None):
    """Build a validated :class:`PipeProfile`.

    ``kind`` is ``straight``, ``sinusoidal`` (``r = r0 (1 + eps sin(2 pi z / L))``)
    or ``tabulated``.  Tabulated ``samples`` are ``(z, r)`` pairs spanning one
    closed period ``[0, L]``; they are replaced by their trigonometric
    interpolant.
    """
    kind = str(kind).lower()
    if kind not in ("straight", "sinusoidal", "tabulated"):
        raise InvalidParameter(f"unknown profile kind {kind!r}")
    if not np.isfinite(L) or L <= 0:
        raise InvalidParameter("L must be positive")
    if kind == "straight":
        if not np.isfinite(r0) or r0 <= 0:
            raise InvalidParameter("r0 must be positive")
        return PipeProfile("straight", float(r0), 0.0, float(L))
    if kind == "sinusoidal":
        if not np.isfinite(r0) or r0 <= 0:
            raise InvalidParameter("r0 must be positive")
        if not 0.0 <= eps <= 0.5:
            raise InvalidParameter("eps must lie in [0, 0.5]")
        return PipeProfile("sinusoidal", float(r0), float(eps), float(L))

    if samples is None or len(samples) < 3:
        raise InvalidParameter("tabulated profile needs at least 3 samples")
    arr = np.asarray(samples, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise InvalidParameter("samples must be (z, r) pairs")
    z, r = arr[:, 0], arr[:, 1]
    if np.any(np.diff(z) <= 0):
        raise InvalidGeometry("sample z values must be strictly increasing")
    if r.min() <= 0:
        raise InvalidGeometry("tabulated radius must be positive")
    if abs(z[0]) > _PERIODIC_TOL * L or abs(z[-1] - L) > _PERIODIC_TOL * L:
        raise InvalidGeometry("samples must span exactly one period [0, L]")
    if abs(r[-1] - r[0]) > _PERIODIC_TOL * max(abs(r[0]), 1.0):
        raise InvalidGeometry("tabulated profile is not periodic: r(0) != r(L)")
    zu, ru = z[:-1], r[:-1]
    n = len(zu)
    n_harm = (n - 1) // 2
    nyquist = n % 2 == 0
    basis = _trig_basis(zu, L, n_harm, nyquist)
    coef, *_ = np.linalg.lstsq(basis, ru, rcond=None)
    prof = PipeProfile(
        "tabulated",
        float(coef[0]),
        0.0,
        float(L),
        tuple((float(a), float(b)) for a, b in arr),
        coef,
    )
    fine = prof.r(np.linspace(0.0, L, 16 * n, endpoint=False))
    if fine.min() <= 0:
        raise InvalidGeometry("interpolated radius is not positive everywhere")
    return prof


@dataclass(frozen=True, eq=False)
class MappedGrid:
    """Staggered grid on the reference rectangle.

    Layout: pressure at cell centres ``(xi_c[i], zeta_c[j])``; transverse
    velocity on xi-faces ``(xi_f[f], zeta_c[j])``; axial velocity (and swirl)
    on zeta-faces ``(xi_c[i], zeta_f[j])`` where face ``j`` is the lower face
    of cell ``j``.  Arrays are indexed ``[xi, zeta]``; the zeta index wraps.
    """

    profile: PipeProfile
    kind: GeometryKind
    n_xi: int
    n_zeta: int
    dxi: float
    dzeta: float
    xi_c: np.ndarray
    xi_f: np.ndarray
    zeta_c: np.ndarray
    zeta_f: np.ndarray
    r_c: np.ndarray
    r_f: np.ndarray
    dr_c: np.ndarray
    measure_raw: float
    scale: float
    vol: np.ndarray
    w_u: np.ndarray
    w_w: np.ndarray
    jac: np.ndarray
    wall_u: np.ndarray

    @property
    def L(self):
        return self.profile.L

    @property
    def axisym(self):
        return self.kind is GeometryKind.AXISYM

    @property
    def xi_min(self):
        return 0.0 if self.axisym else -1.0

    @property
    def tilt(self):
        """Metric term ``r'/r`` at cell centres (discrete ``r'``)."""
        return self.dr_c / self.r_c

    def coefficients(self, xi, zeta):
        """Weighted metric tensor entries ``(aJ, bJ, cJ, J)`` at points.

        ``|grad phi|^2 J = aJ phi_xi^2 + 2 bJ phi_xi phi_zeta + cJ phi_zeta^2``
        with ``J`` the (un-normalised) volume density per ``dxi dzeta``.
        """
        xi = np.asarray(xi, dtype=float)
        r = self.profile.r(zeta)
        rp = self.profile.dr(zeta)
        if self.axisym:
            jac = 2 * np.pi * xi * r * r
        else:
            jac = r * np.ones_like(xi)
        a = (1.0 + (xi * rp) ** 2) / r**2
        b = -xi * rp / r
        return a * jac, b * jac, jac, jac

    def physical_coords(self, xi, zeta):
        """Physical ``(x, z)`` (or ``(rho, z)``) of reference points."""
        xi, zeta = np.broadcast_arrays(np.asarray(xi, float), np.asarray(zeta, float))
        return xi * self.profile.r(zeta), zeta.copy()

    def mesh(self, where="center"):
        """Reference coordinates ``(XI, ZETA)`` of a staggered location."""
        if where == "center":
            return np.meshgrid(self.xi_c, self.zeta_c, indexing="ij")
        if where == "xface":
            return np.meshgrid(self.xi_f, self.zeta_c, indexing="ij")
        if where == "zface":
            return np.meshgrid(self.xi_c, self.zeta_f, indexing="ij")
        raise InvalidParameter(f"unknown location {where!r}")


def build_grid(profile, geometry_kind, n_xi, n_zeta, normalize=True):
    """Evaluate metrics and normalised quadrature weights for a profile."""
    kind = GeometryKind.parse(geometry_kind)
    for name, n in (("Nxi", n_xi), ("Nzeta", n_zeta)):
        if int(n) != n or n < 8 or n % 2:
            raise InvalidParameter(f"{name} must be an even integer >= 8, got {n}")
    n_xi, n_zeta = int(n_xi), int(n_zeta)
    L = profile.L
    if kind is GeometryKind.AXISYM:
        xi_f = np.linspace(0.0, 1.0, n_xi + 1)
    else:
        xi_f = np.linspace(-1.0, 1.0, n_xi + 1)
    dxi = xi_f[1] - xi_f[0]
    xi_c = 0.5 * (xi_f[1:] + xi_f[:-1])
    dzeta = L / n_zeta
    zeta_f = np.arange(n_zeta) * dzeta
    zeta_c = zeta_f + 0.5 * dzeta
    r_c = profile.r(zeta_c)
    r_f = profile.r(zeta_f)
    if r_c.min() <= 0 or r_f.min() <= 0:
        raise InvalidGeometry("wall radius must be positive")
    r_f_up = np.roll(r_f, -1)
    # discrete r' chosen so the unit axial field is exactly solenoidal
    if kind is GeometryKind.AXISYM:
        dr_c = (r_f_up**2 - r_f**2) / (2.0 * dzeta * r_c)
    else:
        dr_c = (r_f_up - r_f) / dzeta
    cell = dxi * dzeta
    if kind is GeometryKind.AXISYM:
        vol = 2 * np.pi * np.outer(xi_c, r_c**2) * cell
        w_w = 2 * np.pi * np.outer(xi_c, r_f**2) * cell
        w_u = 2 * np.pi * np.outer(xi_f, r_c**2) * cell
        jac = 2 * np.pi * np.outer(xi_c, r_c**2)
    else:
        vol = np.outer(np.ones(n_xi), r_c) * cell
        w_w = np.outer(np.ones(n_xi), r_f) * cell
        w_u = np.outer(np.ones(n_xi + 1), r_c) * cell
        jac = np.outer(np.ones(n_xi), r_c)
    w_u[0] *= 0.5
    w_u[-1] *= 0.5
    wall_u = np.zeros((n_xi + 1, n_zeta), dtype=bool)
    wall_u[0] = True
    wall_u[-1] = True
    measure_raw = float(vol.sum())
    scale = 1.0 / measure_raw if normalize else 1.0
    return MappedGrid(
        profile=profile,
        kind=kind,
        n_xi=n_xi,
        n_zeta=n_zeta,
        dxi=dxi,
        dzeta=dzeta,
        xi_c=xi_c,
        xi_f=xi_f,
        zeta_c=zeta_c,
        zeta_f=zeta_f,
        r_c=r_c,
        r_f=r_f,
        dr_c=dr_c,
        measure_raw=measure_raw,
        scale=scale,
        vol=vol * scale,
        w_u=w_u * scale,
        w_w=w_w * scale,
        jac=jac,
        wall_u=wall_u,
    )


def cell_measure(grid):
    """Total quadrature weight of one cell (1 for normalised grids)."""
    return float(grid.vol.sum())
