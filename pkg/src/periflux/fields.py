"""Grid functions and the discrete div/grad/Laplace/Leray/Stokes operators.

Velocity storage on the staggered grid
--------------------------------------
``u`` (shape ``(Nxi+1, Nzeta)``) lives on xi-faces and stores the *tilted*
transverse component ``U = v_t - xi r' v_z`` (``v_t`` is ``v_x`` or
``v_rho``), which is the flux-carrying component of the mapped divergence.
``w`` (``(Nxi, Nzeta)``) is the axial component ``v_z`` on zeta-faces and
``theta`` (AXISYM only) is the swirl ``v_theta`` on the same lattice.

Every operator is a sparse matrix acting on the flattened vector
``[u, w, theta]``.  The inner product matrix ``M`` is assembled from the
physical components, the divergence ``D`` is a flux difference and the
gradient is defined as ``-M^{-1} D^T`` so the two are exact adjoints.  The
Dirichlet energy ``K`` is symmetric positive definite on interior unknowns
and the Laplacian is ``-M^{-1} K``.
"""

from __future__ import annotations

import threading
import weakref
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .exceptions import IncompatibleField, InvalidParameter, SolverFailure
from .geometry import MappedGrid

__all__ = [
    "ScalarField",
    "VectorField",
    "ProjectionResult",
    "operators",
    "gradient",
    "divergence",
    "laplacian_dirichlet",
    "dirichlet_form",
    "inner",
    "norm",
    "unit_axial_field",
    "leray_project",
    "apply_stokes",
    "stokes_solve",
]


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Cell-centred values, shape ``(Nxi, Nzeta)``."""

    grid: MappedGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.n_xi, self.grid.n_zeta):
            raise IncompatibleField(f"scalar field shape {vals.shape} does not match grid")
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True, eq=False)
class VectorField:
    grid: MappedGrid
    u: np.ndarray
    w: np.ndarray
    theta: np.ndarray | None = None
    non_slip: bool = False

    def __post_init__(self):
        g = self.grid
        u = np.asarray(self.u, dtype=float)
        w = np.asarray(self.w, dtype=float)
        if u.shape != (g.n_xi + 1, g.n_zeta) or w.shape != (g.n_xi, g.n_zeta):
            raise IncompatibleField("vector field components do not match grid layout")
        th = self.theta
        if g.axisym:
            th = np.zeros_like(w) if th is None else np.asarray(th, dtype=float)
            if th.shape != w.shape:
                raise IncompatibleField("swirl component does not match grid layout")
        elif th is not None:
            raise IncompatibleField("PLANAR2D fields carry no swirl component")
        if self.non_slip:
            u = u.copy()
            u[0] = 0.0
            u[-1] = 0.0
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "theta", th)

    @classmethod
    def zeros(cls, grid, non_slip=True):
        return cls.from_flat(grid, np.zeros(operators(grid).n_full), non_slip)

    def flat(self):
        parts = [self.u.ravel(), self.w.ravel()]
        if self.theta is not None:
            parts.append(self.theta.ravel())
        return np.concatenate(parts)

    def interior(self):
        """Values on the non-slip unknowns (wall and axis faces dropped)."""
        return self.flat()[operators(self.grid).idx_I]

    @classmethod
    def from_flat(cls, grid, x, non_slip=False):
        nx, nz = grid.n_xi, grid.n_zeta
        n_u = (nx + 1) * nz
        n_w = nx * nz
        x = np.asarray(x, dtype=float)
        u = x[:n_u].reshape(nx + 1, nz)
        w = x[n_u : n_u + n_w].reshape(nx, nz)
        th = x[n_u + n_w :].reshape(nx, nz) if grid.axisym else None
        return cls(grid, u, w, th, non_slip)

    @classmethod
    def from_interior(cls, grid, x_int):
        ops = operators(grid)
        full = np.zeros(ops.n_full)
        full[ops.idx_I] = x_int
        return cls.from_flat(grid, full, non_slip=True)

    def physical(self):
        """Physical components ``(v_t on xi-faces, v_z, v_theta)``."""
        ops = operators(self.grid)
        vt = (ops.R @ self.flat()).reshape(self.grid.n_xi + 1, self.grid.n_zeta)
        return vt, self.w, self.theta

    def _check(self, other):
        if not isinstance(other, VectorField) or other.grid is not self.grid:
            raise IncompatibleField("fields live on different grids")

    def __add__(self, other):
        self._check(other)
        return VectorField.from_flat(
            self.grid, self.flat() + other.flat(), self.non_slip and other.non_slip
        )

    def __sub__(self, other):
        self._check(other)
        return VectorField.from_flat(
            self.grid, self.flat() - other.flat(), self.non_slip and other.non_slip
        )

    def __mul__(self, s):
        return VectorField.from_flat(self.grid, float(s) * self.flat(), self.non_slip)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0


@dataclass(frozen=True)
class ProjectionResult:
    field: VectorField
    phi: ScalarField
    iterations: int
    residual: float


def _scalar_energy(grid, xs_ext, kinds, zs, n_real):
    """Dirichlet form of a scalar lattice function with weight ``J |grad|^2``.

    ``xs_ext`` lists the xi positions of the lattice padded with boundary
    ghosts; ``kinds[e]`` is the real node index, ``-1`` for a zero ghost or
    ``-(2 + r)`` for a ghost mirroring real node ``r``.  Each rectangle
    between neighbouring nodes contributes the metric form with the two
    parallel differences averaged in square, which keeps the result positive
    semidefinite for any metric.
    """
    nz = grid.n_zeta
    n_ext = len(xs_ext)
    rows, cols = [], []
    for e, kd in enumerate(kinds):
        if kd == -1:
            continue
        r = kd if kd >= 0 else -(kd + 2)
        rows.append(e * nz + np.arange(nz))
        cols.append(r * nz + np.arange(nz))
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    P = sp.csr_matrix(
        (np.ones(len(rows)), (rows, cols)), shape=(n_ext * nz, n_real * nz)
    )

    k = np.arange(n_ext - 1)
    m = np.arange(nz)
    K_, M_ = np.meshgrid(k, m, indexing="ij")
    K_ = K_.ravel()
    M_ = M_.ravel()
    M1 = (M_ + 1) % nz
    h = (xs_ext[1:] - xs_ext[:-1])[K_]
    xi_mid = 0.5 * (xs_ext[1:] + xs_ext[:-1])[K_]
    z_mid = zs[M_] + 0.5 * grid.dzeta
    a, b, c, _ = grid.coefficients(xi_mid, z_mid)
    area = h * grid.dzeta * grid.scale
    n_c = len(K_)
    crow = np.arange(n_c)

    def diff(i_plus, i_minus, d):
        return sp.csr_matrix(
            (
                np.concatenate([1.0 / d, -1.0 / d]),
                (np.concatenate([crow, crow]), np.concatenate([i_plus, i_minus])),
            ),
            shape=(n_c, n_ext * nz),
        )

    n00 = K_ * nz + M_
    n10 = (K_ + 1) * nz + M_
    n01 = K_ * nz + M1
    n11 = (K_ + 1) * nz + M1
    dz = np.full(n_c, grid.dzeta)
    gx_lo = diff(n10, n00, h) @ P
    gx_hi = diff(n11, n01, h) @ P
    gz_l = diff(n01, n00, dz) @ P
    gz_r = diff(n11, n10, dz) @ P
    wa = sp.diags(area * a / 2)
    wb = sp.diags(area * b / 2)
    wc = sp.diags(area * c / 2)
    gx = gx_lo + gx_hi
    gz = gz_l + gz_r
    cross = gx.T @ wb @ gz
    K = (
        gx_lo.T @ wa @ gx_lo
        + gx_hi.T @ wa @ gx_hi
        + gz_l.T @ wc @ gz_l
        + gz_r.T @ wc @ gz_r
        + 0.5 * (cross + cross.T)
    )
    return sp.csr_matrix(K)


class Operators:
    """Sparse operators and cached factorisations for one grid."""

    def __init__(self, grid):
        self.grid = g = grid
        nx, nz = g.n_xi, g.n_zeta
        self.n_u = n_u = (nx + 1) * nz
        self.n_w = n_w = nx * nz
        self.n_t = n_t = n_w if g.axisym else 0
        self.n_full = n_u + n_w + n_t
        self.n_cell = nx * nz
        u_int = np.arange(nz, nx * nz)  # xi-faces 1..Nxi-1
        self.idx_I = np.concatenate([u_int, n_u + np.arange(n_w + n_t)])
        self.n_I = len(self.idx_I)
        self.n_u_int = len(u_int)
        self._lock = threading.Lock()
        self._cache = {}
        self._mats = {}

        # physical transverse component on xi-faces: v_t = U + xi r' avg(W)
        rows, cols, vals = [np.arange(n_u)], [np.arange(n_u)], [np.ones(n_u)]
        I_, J_ = np.meshgrid(np.arange(nx + 1), np.arange(nz), indexing="ij")
        I_, J_ = I_.ravel(), J_.ravel()
        tilt = g.xi_f[I_] * g.dr_c[J_]
        count = np.where((I_ == 0) | (I_ == nx), 2.0, 4.0)
        for di in (-1, 0):
            ii = I_ + di
            ok = (ii >= 0) & (ii < nx)
            for dj in (0, 1):
                jj = (J_ + dj) % nz
                rows.append((I_ * nz + J_)[ok])
                cols.append(n_u + ii[ok] * nz + jj[ok])
                vals.append((tilt / count)[ok])
        self.R = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n_u, self.n_full),
        )

        w_u = g.w_u.ravel()
        w_w = g.w_w.ravel()
        diag_w = np.zeros(self.n_full)
        diag_w[n_u : n_u + n_w] = w_w
        if n_t:
            diag_w[n_u + n_w :] = w_w
        self.M = sp.csr_matrix(self.R.T @ sp.diags(w_u) @ self.R + sp.diags(diag_w))

        # divergence as scaled flux differences
        if g.axisym:
            fx = 2 * np.pi * np.outer(g.xi_f, g.r_c) * g.dzeta
            fz = 2 * np.pi * np.outer(g.xi_c, g.r_f**2) * g.dxi
        else:
            fx = np.outer(np.ones(nx + 1), np.ones(nz)) * g.dzeta
            fz = np.outer(np.ones(nx), g.r_f) * g.dxi
        fx = fx * g.scale
        fz = fz * g.scale
        Ic, Jc = np.meshgrid(np.arange(nx), np.arange(nz), indexing="ij")
        Ic, Jc = Ic.ravel(), Jc.ravel()
        cell = Ic * nz + Jc
        Jn = (Jc + 1) % nz
        self.D = sp.csr_matrix(
            (
                np.concatenate([fx[Ic + 1, Jc], -fx[Ic, Jc], fz[Ic, Jn], -fz[Ic, Jc]]),
                (
                    np.tile(cell, 4),
                    np.concatenate(
                        [
                            (Ic + 1) * nz + Jc,
                            Ic * nz + Jc,
                            n_u + Ic * nz + Jn,
                            n_u + Ic * nz + Jc,
                        ]
                    ),
                ),
            ),
            shape=(self.n_cell, self.n_full),
        )
        self.flux_z = fz  # per-face axial flux factor, already scaled
        self.vol = g.vol.ravel()

        idx = self.idx_I
        self.M_II = sp.csc_matrix(self.M[idx][:, idx])
        self.D_I = sp.csr_matrix(self.D[:, idx])
        self.K = self._assemble_K()

    def _assemble_K(self):
        g = self.grid
        nx, nz = g.n_xi, g.n_zeta
        # transverse component on interior xi-faces
        kinds_u = [-1] + list(range(nx - 1)) + [-1]
        K_t = _scalar_energy(g, g.xi_f, kinds_u, g.zeta_c, nx - 1)
        if g.axisym:
            w0 = 2 * np.pi / g.xi_f[1:-1] * g.dxi * g.dzeta * g.scale
            K_t = K_t + sp.diags(np.repeat(w0, nz))
        R_I = self.R[nz : nx * nz][:, self.idx_I]
        K = R_I.T @ K_t @ R_I
        if g.axisym:
            xs = np.concatenate([[0.0], g.xi_c, [1.0]])
            kinds_w = [-2] + list(range(nx)) + [-1]
        else:
            xs = np.concatenate([[-1.0], g.xi_c, [1.0]])
            kinds_w = [-1] + list(range(nx)) + [-1]
        K_w = _scalar_energy(g, xs, kinds_w, g.zeta_f, nx)
        blocks = [K_w]
        if g.axisym:
            kinds_t = [-1] + list(range(nx)) + [-1]
            K_th = _scalar_energy(g, xs, kinds_t, g.zeta_f, nx)
            w0 = 2 * np.pi / g.xi_c * g.dxi * g.dzeta * g.scale
            blocks.append(K_th + sp.diags(np.repeat(w0, nz)))
        K = K + sp.block_diag([sp.csr_matrix((self.n_u_int, self.n_u_int))] + blocks)
        K = sp.csc_matrix(K)
        return sp.csc_matrix(0.5 * (K + K.T))

    # factorisations ---------------------------------------------------
    def _factor(self, key, build):
        with self._lock:
            lu = self._cache.get(key)
            if lu is None:
                lu = spla.splu(sp.csc_matrix(build()), permc_spec="COLAMD")
                self._cache[key] = lu
            return lu

    def saddle(self, A):
        """Saddle matrix ``[[A, D^T], [D, 0]]`` with one divergence row dropped.

        The rows of ``D`` sum to zero, so removing the first one leaves the
        constraint set unchanged and pins the multiplier of cell 0 to zero.
        """
        D = self.D_I[1:]
        return sp.bmat([[A, D.T], [D, None]], format="csc")

    def saddle_solve(self, key, A_builder, rhs, refine=True):
        """Solve the saddle system with velocity right side ``rhs``."""
        lu = self._factor(key, lambda: self.saddle(A_builder()))
        mat = self._mats.get(key)
        if mat is None:
            mat = self._mats[key] = self.saddle(A_builder()).tocsr()
        rhs = np.asarray(rhs, dtype=float)
        extra = self.n_cell - 1
        if rhs.ndim == 1:
            full = np.concatenate([rhs, np.zeros(extra)])
        else:
            full = np.vstack([rhs, np.zeros((extra,) + rhs.shape[1:])])
        sol = lu.solve(full)
        if refine:
            sol += lu.solve(full - mat @ sol)
        mult = sol[self.n_I :]
        pad = np.zeros((1,) + mult.shape[1:])
        mult = np.concatenate([pad, mult])
        mult = mult - np.tensordot(self.vol, mult, axes=(0, 0))
        return sol[: self.n_I], mult

    def project_int(self, rhs):
        """Velocity and multiplier of the M-orthogonal projection problem."""
        return self.saddle_solve("proj", lambda: self.M_II, rhs)

    def stokes_int(self, rhs, refine=True):
        return self.saddle_solve("stokes", lambda: self.K, rhs, refine)

    def mass_solve(self, rhs):
        return self._factor("mass", lambda: self.M_II).solve(np.asarray(rhs, float))


_OPS = weakref.WeakKeyDictionary()
_OPS_LOCK = threading.Lock()


def operators(grid):
    """Operator bundle for ``grid`` (built once, then shared)."""
    if not isinstance(grid, MappedGrid):
        raise IncompatibleField("expected a MappedGrid")
    with _OPS_LOCK:
        ops = _OPS.get(grid)
        if ops is None:
            ops = Operators(grid)
            _OPS[grid] = ops
    return ops


def _same_grid(grid, *fields):
    for f in fields:
        if f.grid is not grid:
            raise IncompatibleField("field belongs to a different grid")


def gradient(grid, s):
    """Face gradient ``-M^{-1} D^T s`` on non-slip faces."""
    _same_grid(grid, s)
    ops = operators(grid)
    g = -ops.mass_solve(ops.D_I.T @ s.values.ravel())
    return VectorField.from_interior(grid, g)


def divergence(grid, u):
    """Cell-averaged divergence (net outward flux over cell volume)."""
    _same_grid(grid, u)
    ops = operators(grid)
    return ScalarField(grid, (ops.D @ u.flat() / ops.vol).reshape(grid.n_xi, grid.n_zeta))


def laplacian_dirichlet(grid, u):
    """Vector Laplacian ``Delta u = -M^{-1} K u`` with non-slip walls."""
    _same_grid(grid, u)
    ops = operators(grid)
    return VectorField.from_interior(grid, -ops.mass_solve(ops.K @ u.interior()))


def dirichlet_form(grid, u, v):
    """``<grad u, grad v>`` on non-slip fields."""
    _same_grid(grid, u, v)
    ops = operators(grid)
    return float(u.interior() @ (ops.K @ v.interior()))


def inner(grid, a, b):
    """Weighted L2 inner product over one cell."""
    _same_grid(grid, a, b)
    if isinstance(a, ScalarField) and isinstance(b, ScalarField):
        return float(np.sum(grid.vol * a.values * b.values))
    if isinstance(a, VectorField) and isinstance(b, VectorField):
        return float(a.flat() @ (operators(grid).M @ b.flat()))
    raise IncompatibleField("inner product needs two scalar or two vector fields")


def norm(grid, a):
    return float(np.sqrt(max(inner(grid, a, a), 0.0)))


def unit_axial_field(grid):
    """Cartesian ``e_z``: ``w = 1`` and ``U = -xi r'`` on every xi-face."""
    u = -np.outer(grid.xi_f, grid.dr_c)
    w = np.ones((grid.n_xi, grid.n_zeta))
    th = np.zeros_like(w) if grid.axisym else None
    return VectorField(grid, u, w, th, non_slip=False)


def _check_tol(tol):
    if not (tol > 0):
        raise InvalidParameter("tol must be positive")


def _div_norm(ops, x_int):
    d = ops.D_I @ x_int / ops.vol
    return float(np.sqrt(np.sum(ops.vol * d * d)))


def leray_project(grid, u, tol=1e-10, method="direct", maxiter=5000):
    """Weighted-L2 projection onto discretely solenoidal non-slip fields.

    ``method="direct"`` factorises the bordered saddle system once per grid.
    ``method="cg"`` runs Jacobi-preconditioned conjugate gradients on the
    pressure Schur complement ``D M^{-1} D^T`` instead.
    """
    _same_grid(grid, u)
    _check_tol(tol)
    ops = operators(grid)
    rhs = (ops.M @ u.flat())[ops.idx_I]
    if method == "direct":
        y, mult = ops.project_int(rhs)
        iters = 1
    elif method == "cg":
        y, mult, iters = _project_cg(ops, rhs, tol, maxiter)
    else:
        raise InvalidParameter(f"unknown projection method {method!r}")
    scale = max(np.sqrt(max(rhs @ ops.mass_solve(rhs), 0.0)), 1.0)
    res = _div_norm(ops, y)
    if res > tol * scale:
        raise SolverFailure("projection residual above tolerance", residual=res)
    phi = -mult
    phi = phi - np.sum(ops.vol * phi)
    return ProjectionResult(
        VectorField.from_interior(grid, y),
        ScalarField(grid, phi.reshape(grid.n_xi, grid.n_zeta)),
        iters,
        res,
    )


def _project_cg(ops, rhs, tol, maxiter):
    u0 = ops.mass_solve(rhs)
    Dt = ops.D_I.T.tocsr()

    def schur(phi):
        phi = phi - np.sum(ops.vol * phi)
        return ops.D_I @ ops.mass_solve(Dt @ phi)

    n = ops.n_cell
    S = spla.LinearOperator((n, n), matvec=schur)
    mdiag = ops.M_II.diagonal()
    jac = np.asarray((ops.D_I.multiply(ops.D_I)) @ (1.0 / mdiag)).ravel()
    Pre = spla.LinearOperator((n, n), matvec=lambda r: r / jac)
    b = ops.D_I @ u0
    count = [0]

    def cb(_):
        count[0] += 1

    phi, info = spla.cg(S, b, rtol=tol * 1e-2, atol=0.0, maxiter=maxiter, M=Pre, callback=cb)
    if info != 0:
        raise SolverFailure("CG did not converge in projection", residual=float(np.linalg.norm(b - S @ phi)))
    y = u0 - ops.mass_solve(Dt @ phi)
    return y, phi, count[0]


def apply_stokes(grid, u, tol=1e-10):
    """``A_H u = P(-Delta u)`` for a solenoidal non-slip field."""
    _same_grid(grid, u)
    _check_tol(tol)
    ops = operators(grid)
    y, _ = ops.project_int(ops.K @ u.interior())
    return VectorField.from_interior(grid, y)


def stokes_solve(grid, f, tol=1e-10):
    """Solve ``A_H u = P f`` (steady Stokes with non-slip walls)."""
    _same_grid(grid, f)
    _check_tol(tol)
    ops = operators(grid)
    rhs = (ops.M @ f.flat())[ops.idx_I]
    y, _ = ops.stokes_int(rhs)
    # residual of A_H u = P f measured in the weighted norm
    au, _ = ops.project_int(ops.K @ y)
    pf, _ = ops.project_int(rhs)
    r = au - pf
    res = float(np.sqrt(max(r @ (ops.M_II @ r), 0.0)))
    ref = max(float(np.sqrt(max(pf @ (ops.M_II @ pf), 0.0))), 1e-300)
    if res > tol * max(ref, 1.0):
        raise SolverFailure("Stokes residual above tolerance", residual=res)
    return VectorField.from_interior(grid, y)
