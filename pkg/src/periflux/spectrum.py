"""Leading Stokes eigenpairs, the flux direction and the base flow."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from .exceptions import DegenerateGeometry, InvalidParameter, SolverFailure
from .fields import VectorField, leray_project, operators, unit_axial_field

__all__ = [
    "SpectralBasis",
    "eigenpairs",
    "flux_direction",
    "base_flow",
    "bar_e_norm",
    "build_basis",
]


@dataclass(frozen=True, eq=False)
class SpectralBasis:
    """Eigen data in interior coordinates.

    ``vectors`` has shape ``(n_interior, m)``; column ``j`` is ``w_j`` and the
    columns are orthonormal in the weighted inner product.
    """

    grid: object
    eigenvalues: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    e_vec: np.ndarray | None = None
    Pe_z_norm: float | None = None
    c_hat: np.ndarray | None = None
    w_vec: np.ndarray | None = None
    C0sq: float | None = None
    C1sq: float | None = None
    seed: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def m(self):
        return len(self.eigenvalues)

    @property
    def bar_e_norm_sq(self):
        return float(np.sum(self.c_hat**2))

    def field(self, j):
        """Eigenfield ``w_j`` (0-based) as a :class:`VectorField`."""
        return VectorField.from_interior(self.grid, self.vectors[:, j])

    @property
    def e_field(self):
        return VectorField.from_interior(self.grid, self.e_vec)

    @property
    def w_flow(self):
        return VectorField.from_interior(self.grid, self.w_vec)

    def gram_error(self):
        ops = operators(self.grid)
        G = self.vectors.T @ (ops.M_II @ self.vectors)
        return float(np.max(np.abs(G - np.eye(self.m))))

    # Coefficient calculus.  A field is ``c w + sum_j a_j w_j`` and is stored
    # as ``coef = [c, a_1, ..., a_m]`` (trailing axis); leading axes batch.
    def synthesize(self, coef):
        coef = np.asarray(coef, dtype=float)
        return coef[..., :1] * self.w_vec + coef[..., 1:] @ self.vectors.T

    def coef_flux(self, coef):
        """``(u, e)``."""
        return coef[..., 0] * self.C1sq + coef[..., 1:] @ self.c_hat

    def coef_A_e(self, coef):
        """``(A_H u, e)``."""
        return coef[..., 0] + coef[..., 1:] @ (self.eigenvalues * self.c_hat)

    def coef_l2_sq(self, coef):
        c, a = coef[..., 0], coef[..., 1:]
        return c * c * self.C0sq + 2 * c * (a @ (self.c_hat / self.eigenvalues)) + np.sum(a * a, -1)

    def coef_energy(self, coef):
        """``(A_H u, u) = ||grad u||^2``."""
        c, a = coef[..., 0], coef[..., 1:]
        return c * c * self.C1sq + 2 * c * (a @ self.c_hat) + np.sum(self.eigenvalues * a * a, -1)

    def coef_A_norm_sq(self, coef):
        """``||A_H u||^2``."""
        c, a = coef[..., 0], coef[..., 1:]
        lam = self.eigenvalues
        return c * c + 2 * c * (a @ (lam * self.c_hat)) + np.sum((lam * a) ** 2, -1)

    def summary(self):
        return {
            "m": self.m,
            "eigenvalues": self.eigenvalues.tolist(),
            "c_hat": None if self.c_hat is None else self.c_hat.tolist(),
            "eig_residual_max": float(np.max(self.residuals)) if self.m else 0.0,
            "Pe_z_norm": self.Pe_z_norm,
            "C0sq": self.C0sq,
            "C1sq": self.C1sq,
            "bar_e_norm": None if self.c_hat is None else bar_e_norm(self),
            "seed": self.seed,
        }


def _stokes_residual(ops, vecs, lam):
    """``||A_H w - lam w||`` for each column."""
    au, _ = ops.project_int(ops.K @ vecs)
    r = au - vecs * lam
    return np.sqrt(np.maximum(np.einsum("ij,ij->j", r, ops.M_II @ r), 0.0))


def _rayleigh_ritz(ops, V):
    G = V.T @ (ops.M_II @ V)
    C = np.linalg.cholesky(0.5 * (G + G.T))
    V = np.linalg.solve(C, V.T).T
    H = V.T @ (ops.K @ V)
    lam, Q = np.linalg.eigh(0.5 * (H + H.T))
    return lam, V @ Q


def eigenpairs(grid, m=64, tol=1e-8, seed=0):
    """Smallest ``m`` eigenpairs of the discrete Stokes operator.

    Shift-invert Lanczos (ARPACK) on ``K w = lam M w`` restricted to the
    discretely solenoidal subspace; the inverse is one bordered saddle solve.
    """
    ops = operators(grid)
    n_free = ops.n_I - ops.n_cell + 1
    if int(m) != m or m < 1:
        raise InvalidParameter("m must be a positive integer")
    if m > min(n_free // 4, ops.n_I - 2):
        raise InvalidParameter(f"m={m} too large for this grid")
    m = int(m)

    def op_inv(b):
        return ops.stokes_int(b, refine=False)[0]

    n = ops.n_I
    OPinv = spla.LinearOperator((n, n), matvec=op_inv, dtype=float)
    rng = np.random.default_rng(seed)
    v0 = op_inv(ops.M_II @ rng.standard_normal(n))
    ncv = min(n - 1, max(2 * m + 1, m + 32))
    try:
        lam, vecs = spla.eigsh(
            ops.K, k=m, M=ops.M_II, sigma=0.0, OPinv=OPinv, v0=v0, ncv=ncv,
            tol=0.0, which="LM",
        )
    except spla.ArpackNoConvergence as exc:
        raise SolverFailure(f"eigensolver did not converge: {exc}") from None
    # one refined subspace-iteration sweep, then Rayleigh-Ritz in the
    # weighted inner product
    vecs, _ = ops.stokes_int(ops.M_II @ vecs)
    if ops.n_t:
        # swirl and meridional blocks decouple; keep each eigenfield pure
        th = slice(ops.n_I - ops.n_t, None)
        swirl = np.linalg.norm(vecs[th], axis=0) > np.linalg.norm(vecs[: th.start], axis=0)
        vecs[th, ~swirl] = 0.0
        vecs[: th.start, swirl] = 0.0
        groups = [vecs[:, ~swirl], vecs[:, swirl]]
    else:
        groups = [vecs]
    lams, blocks = [], []
    for V in groups:
        if V.shape[1] == 0:
            continue
        lj, Vj = _rayleigh_ritz(ops, V)
        lams.append(lj)
        blocks.append(Vj)
    lam = np.concatenate(lams)
    order = np.argsort(lam, kind="stable")
    lam = lam[order]
    vecs = np.hstack(blocks)[:, order]
    # fix signs deterministically: largest-magnitude entry positive
    idx = np.argmax(np.abs(vecs), axis=0)
    vecs = vecs * np.sign(vecs[idx, np.arange(m)])
    res = _stokes_residual(ops, vecs, lam)
    if np.any(res > tol * np.maximum(lam, 1.0)):
        raise SolverFailure("eigen-residual above tolerance", residual=float(res.max()))
    return SpectralBasis(grid, lam, vecs, res, seed=seed)


def flux_direction(grid, tol=1e-10):
    """``e = P e_z / ||P e_z||`` and ``||P e_z||``."""
    ops = operators(grid)
    proj = leray_project(grid, unit_axial_field(grid), tol)
    x = proj.field.interior()
    nrm = float(np.sqrt(x @ (ops.M_II @ x)))
    if nrm <= 10 * tol:
        raise DegenerateGeometry("projected axial direction vanishes")
    return VectorField.from_interior(grid, x / nrm), nrm


def base_flow(grid, e_field, tol=1e-10):
    """Solve ``A_H w = e``; return ``(w, C0sq, C1sq)``."""
    ops = operators(grid)
    e = e_field.interior()
    w, _ = ops.stokes_int(ops.M_II @ e)
    C0sq = float(w @ (ops.M_II @ w))
    C1sq = float(w @ (ops.M_II @ e))
    return VectorField.from_interior(grid, w), C0sq, C1sq


def bar_e_norm(basis, m_prime=None):
    """``sqrt(sum_{j <= m'} c_hat_j^2)``."""
    m_prime = basis.m if m_prime is None else int(m_prime)
    if not 0 <= m_prime <= basis.m:
        raise InvalidParameter("m' must lie in [0, m]")
    return float(np.sqrt(np.sum(basis.c_hat[:m_prime] ** 2)))


def build_basis(grid, m=64, tol=1e-8, seed=0, proj_tol=1e-10):
    """Eigenpairs plus flux direction, base flow and derived constants."""
    eig = eigenpairs(grid, m, tol, seed)
    ops = operators(grid)
    e_field, pe = flux_direction(grid, proj_tol)
    e = e_field.interior()
    w_field, C0sq, C1sq = base_flow(grid, e_field, proj_tol)
    c_hat = eig.vectors.T @ (ops.M_II @ e)
    return SpectralBasis(
        grid,
        eig.eigenvalues,
        eig.vectors,
        eig.residuals,
        e_vec=e,
        Pe_z_norm=pe,
        c_hat=c_hat,
        w_vec=w_field.interior(),
        C0sq=C0sq,
        C1sq=C1sq,
        seed=seed,
    )
