import numpy as np
import pytest

from periflux.exceptions import InvalidParameter
from periflux.fields import VectorField, apply_stokes, dirichlet_form, inner, norm, operators
from periflux.geometry import build_grid, make_profile
from periflux.spectrum import bar_e_norm, base_flow, build_basis, eigenpairs, flux_direction


@pytest.fixture(scope="module")
def wavy_basis(basis_for):
    return basis_for("sinusoidal", "axisym", 16, 24)


def test_straight_channel_axial_mode():
    g = build_grid(make_profile("straight", L=0.2), "planar2d", 32, 32)
    eig = eigenpairs(g, m=4)
    f = eig.vectors[:, 0]
    field = VectorField.from_interior(g, f)
    # z-independent, purely axial
    assert np.max(np.abs(field.u)) < 1e-8
    assert np.max(np.abs(field.w - field.w[:, :1])) < 1e-8
    # 1D Dirichlet problem -w'' = lam w on (-1, 1), discretised the same way
    n = g.n_xi
    h = g.dxi
    T = (np.diag(np.full(n, 2.0)) - np.diag(np.ones(n - 1), 1) - np.diag(np.ones(n - 1), -1)) / h**2
    T[0, 0] = T[-1, -1] = 3.0 / h**2  # wall at half a cell
    lam_1d = np.linalg.eigvalsh(T)[0]
    assert abs(eig.eigenvalues[0] - lam_1d) <= 1e-8 * lam_1d
    assert abs(eig.eigenvalues[0] - np.pi**2 / 4) < 2e-3
    assert eig.residuals.max() <= 1e-8


@pytest.mark.parametrize("kind", ["planar2d", "axisym"])
def test_eigen_structure(basis_for, kind):
    g, b = basis_for("sinusoidal", kind, 16, 24)
    assert np.all(b.eigenvalues > 0)
    assert np.all(np.diff(b.eigenvalues) >= 0)
    assert b.residuals.max() <= 1e-8
    assert b.gram_error() <= 1e-10
    for j in (0, 5, b.m - 1):
        w = b.field(j)
        r = apply_stokes(g, w) - w * b.eigenvalues[j]
        assert norm(g, r) <= 1e-8 * b.eigenvalues[j]


def test_m_too_large():
    g = build_grid(make_profile("straight"), "planar2d", 8, 8)
    with pytest.raises(InvalidParameter):
        eigenpairs(g, m=operators(g).n_I)
    with pytest.raises(InvalidParameter):
        eigenpairs(g, m=0)


def test_flux_direction_straight():
    g = build_grid(make_profile("straight"), "axisym", 16, 16)
    e, pe = flux_direction(g)
    assert abs(pe - 1.0) < 1e-12
    assert abs(norm(g, e) - 1.0) <= 1e-12


def test_flux_direction_wavy():
    g = build_grid(make_profile("sinusoidal", eps=0.2, L=2.0), "planar2d", 16, 16)
    e, pe = flux_direction(g)
    assert 0 < pe < 1.0
    assert abs(norm(g, e) - 1.0) <= 1e-12


def test_base_flow_constants():
    g = build_grid(make_profile("straight"), "planar2d", 32, 32)
    e, _ = flux_direction(g)
    w, C0sq, C1sq = base_flow(g, e)
    assert abs(C1sq - dirichlet_form(g, w, w)) <= 1e-10 * C1sq
    assert abs(C1sq - 1 / 3) < 1e-3
    assert C0sq > 0


def test_base_flow_wavy_consistency(wavy_basis):
    g, b = wavy_basis
    w = b.w_flow
    assert abs(b.C1sq - dirichlet_form(g, w, w)) <= 1e-10 * b.C1sq
    assert abs(b.C1sq - inner(g, w, b.e_field)) <= 1e-10 * b.C1sq
    # recorded Poincare-type bound with the smallest eigenvalue
    assert b.C0sq <= b.C1sq / b.eigenvalues[0] * (1 + 1e-8)


def test_bar_e_norm(wavy_basis):
    _, b = wavy_basis
    assert bar_e_norm(b, 0) == 0.0
    seq = [bar_e_norm(b, k) for k in range(b.m + 1)]
    assert np.all(np.diff(seq) >= 0)
    assert seq[-1] <= 1 - 1e-12
    assert seq[-1] ** 2 == pytest.approx(b.bar_e_norm_sq)
    with pytest.raises(InvalidParameter):
        bar_e_norm(b, b.m + 1)


def test_coercivity_identity(wavy_basis):
    _, b = wavy_basis
    c = b.c_hat
    M = np.eye(b.m) - np.outer(c, c)
    for nu in (0.3, 2.0):
        assert abs(np.linalg.eigvalsh(nu * M)[0] - nu * (1 - b.bar_e_norm_sq)) <= 1e-10


def test_coefficient_calculus(wavy_basis, rng):
    g, b = wavy_basis
    ops = operators(g)
    coef = rng.standard_normal(b.m + 1)
    v = b.synthesize(coef)
    Mv = ops.M_II @ v
    assert b.coef_flux(coef) == pytest.approx(v @ (ops.M_II @ b.e_vec), rel=1e-10)
    assert b.coef_l2_sq(coef) == pytest.approx(v @ Mv, rel=1e-10)
    assert b.coef_energy(coef) == pytest.approx(v @ (ops.K @ v), rel=1e-8)


def test_deterministic_seed():
    g = build_grid(make_profile("sinusoidal", eps=0.2, L=2.0), "planar2d", 16, 16)
    a = build_basis(g, m=8, seed=3)
    b = build_basis(g, m=8, seed=3)
    assert np.array_equal(a.eigenvalues, b.eigenvalues)
    assert np.array_equal(np.abs(a.c_hat), np.abs(b.c_hat))


def test_summary_fields(wavy_basis):
    s = wavy_basis[1].summary()
    assert s["m"] == 24
    assert len(s["eigenvalues"]) == 24
    assert s["bar_e_norm"] < 1
