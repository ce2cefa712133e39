import numpy as np
import pytest

from periflux.exceptions import IncompatibleField, InvalidParameter
from periflux.fields import (
    ScalarField,
    VectorField,
    apply_stokes,
    dirichlet_form,
    divergence,
    gradient,
    inner,
    laplacian_dirichlet,
    leray_project,
    norm,
    operators,
    stokes_solve,
    unit_axial_field,
)
from periflux.geometry import build_grid, make_profile

KINDS = ("planar2d", "axisym")


def wavy(kind, n=16):
    return build_grid(make_profile("sinusoidal", eps=0.2, L=2.0), kind, n, n)


def straight(kind, n=16, L=1.0):
    return build_grid(make_profile("straight", L=L), kind, n, n)


def random_interior(g, rng):
    return VectorField.from_interior(g, rng.standard_normal(operators(g).n_I))


def random_solenoidal(g, rng):
    return leray_project(g, random_interior(g, rng)).field


@pytest.mark.parametrize("kind", KINDS)
def test_gradient_of_constant(kind):
    g = wavy(kind)
    v = gradient(g, ScalarField(g, np.full((16, 16), 3.7)))
    assert np.max(np.abs(v.flat())) < 1e-12


def test_gradient_linear_axial():
    g = straight("planar2d")
    ZE = g.mesh("center")[1]
    v = gradient(g, ScalarField(g, ZE))
    # axial faces away from the periodic seam see slope 1 exactly
    assert np.allclose(v.w[:, 1:], 1.0, atol=1e-12)
    assert np.max(np.abs(v.u)) < 1e-12


@pytest.mark.parametrize("kind", KINDS)
def test_gradient_second_order_on_wavy(kind):
    errs = []
    for n in (16, 32, 64):
        g = wavy(kind, n)
        ZE = g.mesh("center")[1]
        v = gradient(g, ScalarField(g, np.sin(np.pi * ZE)))
        exact_w = np.pi * np.cos(np.pi * g.mesh("zface")[1])
        vt, vz, _ = v.physical()
        # the wall-adjacent row is the adjoint of a one-sided divergence, not a pointwise difference
        errs.append(max(np.max(np.abs(vz - exact_w)[1:-1]), np.max(np.abs(vt[1:-1]))))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert rates.min() > 1.8


@pytest.mark.parametrize("kind", KINDS)
def test_divergence_gradient_adjoint(kind, rng):
    g = wavy(kind)
    worst = 0.0
    for _ in range(100):
        u = random_interior(g, rng)
        s = ScalarField(g, rng.standard_normal((16, 16)))
        lhs = inner(g, divergence(g, u), s) + inner(g, u, gradient(g, s))
        worst = max(worst, abs(lhs) / (norm(g, u) * norm(g, s)))
    assert worst <= 1e-13


def test_divergence_of_sampled_solenoidal_field():
    errs = []
    for n in (16, 32, 64):
        g = straight("planar2d", n)
        Xu, Zu = g.mesh("xface")
        Xw, Zw = g.mesh("zface")
        k = 2 * np.pi
        # stream function (1 - x^2)^2 sin(k z)
        u = (1 - Xu**2) ** 2 * k * np.cos(k * Zu)
        w = 4 * Xw * (1 - Xw**2) * np.sin(k * Zw)
        d = divergence(g, VectorField(g, u, w))
        errs.append(np.sqrt(np.sum(g.vol * d.values**2)))
    assert max(errs) < 1e-12 or np.log2(errs[0] / errs[1]) > 1.8


@pytest.mark.parametrize("kind", KINDS)
def test_unit_axial_field(kind):
    g = wavy(kind)
    e = unit_axial_field(g)
    vt, vz, _ = e.physical()
    assert np.allclose(vz, 1.0)
    assert np.max(np.abs(vt)) < 1e-13
    gs = straight(kind)
    es = unit_axial_field(gs)
    assert np.all(es.u == 0) and np.all(es.w == 1)


def test_unit_axial_is_solenoidal():
    for kind in KINDS:
        g = wavy(kind)
        assert np.max(np.abs(divergence(g, unit_axial_field(g)).values)) < 1e-12


@pytest.mark.parametrize("kind", KINDS)
def test_laplacian_zero_and_symmetric(kind, rng):
    g = wavy(kind)
    z = VectorField.zeros(g)
    assert np.all(laplacian_dirichlet(g, z).flat() == 0)
    for _ in range(10):
        u, v = random_interior(g, rng), random_interior(g, rng)
        a = inner(g, laplacian_dirichlet(g, u), v)
        b = inner(g, laplacian_dirichlet(g, v), u)
        scale = np.sqrt(dirichlet_form(g, u, u) * dirichlet_form(g, v, v))
        assert abs(a - b) <= 1e-13 * scale


def test_inner_properties(rng):
    g = wavy("axisym")
    one = ScalarField(g, np.ones((16, 16)))
    assert abs(inner(g, one, one) - 1.0) <= 1e-14
    a, b, c = (random_interior(g, rng) for _ in range(3))
    assert inner(g, a, a) > 0
    assert inner(g, VectorField.zeros(g), VectorField.zeros(g)) == 0
    lhs = inner(g, a * 2.0 + b, c)
    rhs = 2.0 * inner(g, a, c) + inner(g, b, c)
    assert abs(lhs - rhs) <= 1e-14 * norm(g, c) * (2 * norm(g, a) + norm(g, b))
    with pytest.raises(IncompatibleField):
        inner(g, a, one)


def test_fields_on_different_grids():
    g1, g2 = wavy("planar2d"), wavy("planar2d")
    with pytest.raises(IncompatibleField):
        inner(g1, VectorField.zeros(g1), VectorField.zeros(g2))
    with pytest.raises(IncompatibleField):
        VectorField(g1, np.zeros((3, 3)), np.zeros((3, 3)))
    with pytest.raises(IncompatibleField):
        VectorField(g1, np.zeros((17, 16)), np.zeros((16, 16)), np.zeros((16, 16)))


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("method", ["direct", "cg"])
def test_projection_properties(kind, method, rng):
    g = wavy(kind)
    u, v = random_interior(g, rng), random_interior(g, rng)
    Pu = leray_project(g, u, method=method).field
    Pv = leray_project(g, v, method=method).field
    tol = 1e-9
    assert np.max(np.abs(leray_project(g, Pu).field.flat() - Pu.flat())) <= tol * norm(g, u)
    assert abs(inner(g, Pu, v) - inner(g, u, Pv)) <= tol * norm(g, u) * norm(g, v)
    assert norm(g, Pu) <= norm(g, u) * (1 + 1e-12)
    s = ScalarField(g, rng.standard_normal((16, 16)))
    grad = gradient(g, s)
    assert norm(g, leray_project(g, grad, method=method).field) <= tol * norm(g, grad)
    assert np.max(np.abs(divergence(g, Pu).values)) < 1e-9 * norm(g, u) * 16**2


def test_projection_keeps_axial_on_straight():
    g = straight("planar2d")
    e = unit_axial_field(g)
    p = leray_project(g, e)
    assert np.max(np.abs(p.field.flat() - e.flat())) < 1e-12


def test_projection_bad_inputs():
    g = wavy("planar2d")
    with pytest.raises(InvalidParameter):
        leray_project(g, VectorField.zeros(g), tol=0.0)
    with pytest.raises(InvalidParameter):
        leray_project(g, VectorField.zeros(g), method="magic")


@pytest.mark.parametrize("kind", KINDS)
def test_stokes_operator(kind, rng):
    g = wavy(kind)
    assert np.all(apply_stokes(g, VectorField.zeros(g)).flat() == 0)
    u, v = random_solenoidal(g, rng), random_solenoidal(g, rng)
    a = inner(g, apply_stokes(g, u), v)
    b = inner(g, u, apply_stokes(g, v))
    assert abs(a - b) <= 1e-12 * max(abs(a), 1.0)
    f = random_interior(g, rng)
    x = stokes_solve(g, f)
    r = apply_stokes(g, x) - leray_project(g, f).field
    assert norm(g, r) <= 1e-9 * norm(g, f)
    assert norm(g, stokes_solve(g, VectorField.zeros(g))) == 0


@pytest.mark.parametrize("kind,exact", [("planar2d", lambda x: (1 - x**2) / 2), ("axisym", lambda x: (1 - x**2) / 4)])
def test_stokes_solve_straight_profile(kind, exact):
    errs = []
    for n in (16, 32):
        g = straight(kind, n)
        w = stokes_solve(g, unit_axial_field(g))
        errs.append(np.max(np.abs(w.w[:, 0] - exact(g.xi_c))))
    assert errs[1] < 1e-3
    assert errs[1] < errs[0] / 3.5


def test_poincare_constant_stable():
    import scipy.sparse.linalg as spla

    vals = []
    for n in (16, 32):
        ops = operators(wavy("planar2d", n))
        lam = spla.eigsh(ops.K, k=1, M=ops.M_II, sigma=0, which="LM")[0][0]
        vals.append(1 / np.sqrt(lam))
    assert abs(vals[1] / vals[0] - 1) < 0.05


def test_field_arithmetic():
    g = wavy("axisym")
    e = unit_axial_field(g)
    assert np.allclose((e + e).flat(), 2 * e.flat())
    assert np.allclose((e - e).flat(), 0)
    assert np.allclose((-e).flat(), -e.flat())
    assert np.allclose((3 * e).flat(), 3 * e.flat())
