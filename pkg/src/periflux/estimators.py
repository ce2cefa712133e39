"""scikit-learn style front ends.

``fit`` takes flux samples over one period (uniform in time); ``predict``
maps times to interior velocity vectors.  Geometry and discretisation are
constructor parameters so ``get_params``/``set_params``/``clone`` work as
usual.
"""

from __future__ import annotations

import threading

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import InvalidParameter
from .fields import operators
from .geometry import build_grid, make_profile
from .harmonic import evaluate, flux_fourier, recover_psi, solve_periodic_stokes, verify_estimates
from .nonlinear import solve_ns
from .spectrum import build_basis

__all__ = ["EigenBasis", "PeriodicStokesFlow", "PeriodicNavierStokesFlow", "cached_basis"]

_BASES = {}
_BASES_LOCK = threading.Lock()


def cached_basis(profile_kind, geometry, r0, eps, L, n_xi, n_zeta, m, tol=1e-8, seed=0):
    """Grid and basis shared between estimators with identical settings."""
    key = (profile_kind, str(geometry), float(r0), float(eps), float(L), int(n_xi), int(n_zeta),
           int(m), float(tol), int(seed))
    with _BASES_LOCK:
        hit = _BASES.get(key)
    if hit is not None:
        return hit
    prof = make_profile(profile_kind, r0=r0, eps=eps, L=L)
    grid = build_grid(prof, geometry, n_xi, n_zeta)
    basis = build_basis(grid, m=m, tol=tol, seed=seed)
    with _BASES_LOCK:
        _BASES.setdefault(key, (grid, basis))
        return _BASES[key]


class _GeometryParams(BaseEstimator):
    def _basis(self):
        return cached_basis(
            self.profile, self.geometry, self.r0, self.eps, self.L,
            self.n_xi, self.n_zeta, self.m, self.eig_tol, self.random_state,
        )


class EigenBasis(TransformerMixin, _GeometryParams):
    """Projection of interior velocity vectors onto the leading Stokes eigenfields."""

    def __init__(self, profile="sinusoidal", geometry="axisym", r0=1.0, eps=0.2, L=2.0,
                 n_xi=32, n_zeta=32, m=32, eig_tol=1e-8, random_state=0):
        self.profile = profile
        self.geometry = geometry
        self.r0 = r0
        self.eps = eps
        self.L = L
        self.n_xi = n_xi
        self.n_zeta = n_zeta
        self.m = m
        self.eig_tol = eig_tol
        self.random_state = random_state

    def fit(self, X=None, y=None):
        self.grid_, self.basis_ = self._basis()
        self.eigenvalues_ = self.basis_.eigenvalues.copy()
        self.n_features_in_ = operators(self.grid_).n_I
        return self

    def transform(self, X):
        check_is_fitted(self, "basis_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise InvalidParameter(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        ops = operators(self.grid_)
        return X @ (ops.M_II @ self.basis_.vectors)

    def inverse_transform(self, C):
        check_is_fitted(self, "basis_")
        C = check_array(C)
        return C @ self.basis_.vectors.T


class PeriodicStokesFlow(_GeometryParams):
    """Time-periodic Stokes flow driven by a prescribed flux."""

    def __init__(self, profile="sinusoidal", geometry="axisym", r0=1.0, eps=0.2, L=2.0,
                 n_xi=32, n_zeta=32, m=32, nu=1.0, T=1.0, K=None, eig_tol=1e-8,
                 random_state=0):
        self.profile = profile
        self.geometry = geometry
        self.r0 = r0
        self.eps = eps
        self.L = L
        self.n_xi = n_xi
        self.n_zeta = n_zeta
        self.m = m
        self.nu = nu
        self.T = T
        self.K = K
        self.eig_tol = eig_tol
        self.random_state = random_state

    def _flux(self, X):
        g = check_array(X, ensure_2d=False, dtype=float)
        if g.ndim != 1:
            g = g.ravel()
        if not self.T > 0:
            raise InvalidParameter("T must be positive")
        return flux_fourier(g, self.K, self.T)

    def _solve(self, grid, basis, flux):
        return solve_periodic_stokes(grid, basis, flux, self.nu)

    def fit(self, X, y=None):
        """``X``: flux samples ``g(i T / N)``, ``i = 0..N-1``."""
        if not self.nu > 0:
            raise InvalidParameter("nu must be positive")
        flux = self._flux(X)
        self.grid_, self.basis_ = self._basis()
        self.flux_ = flux
        self.solution_ = self._solve(self.grid_, self.basis_, flux)
        self.n_features_in_ = 1
        return self

    def predict(self, t):
        """Interior velocity vectors at times ``t``; shape ``(len(t), n_interior)``."""
        check_is_fitted(self, "solution_")
        t = check_array(np.atleast_1d(t), ensure_2d=False, dtype=float).ravel()
        return np.atleast_2d(self.solution_.interior_at(t))

    def predict_field(self, t):
        check_is_fitted(self, "solution_")
        return evaluate(self.solution_, t)

    def predict_flux(self, t):
        check_is_fitted(self, "solution_")
        b = self.basis_
        return b.coef_flux(self.solution_.coef_at(np.asarray(t, float))) * b.Pe_z_norm / self.grid_.L

    def pressure_drive(self, t):
        check_is_fitted(self, "solution_")
        return recover_psi(self.solution_, times=np.atleast_1d(t))["samples"]

    def estimate_ratios(self):
        check_is_fitted(self, "solution_")
        return verify_estimates(self.solution_).to_dict()


class PeriodicNavierStokesFlow(PeriodicStokesFlow):
    """Navier-Stokes counterpart solved by Picard iteration."""

    def __init__(self, profile="sinusoidal", geometry="axisym", r0=1.0, eps=0.2, L=2.0,
                 n_xi=32, n_zeta=32, m=32, nu=1.0, T=1.0, K=None, eig_tol=1e-8,
                 random_state=0, tol=1e-10, max_iter=50):
        super().__init__(profile, geometry, r0, eps, L, n_xi, n_zeta, m, nu, T, K, eig_tol,
                         random_state)
        self.tol = tol
        self.max_iter = max_iter

    def _solve(self, grid, basis, flux):
        sol, report = solve_ns(grid, basis, flux, self.nu, self.tol, self.max_iter)
        self.report_ = report
        return sol
