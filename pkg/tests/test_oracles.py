import numpy as np
import pytest

from periflux.exceptions import IncompatibleField, InvalidOracleUse, InvalidParameter
from periflux.fields import VectorField
from periflux.geometry import build_grid, make_profile
from periflux.harmonic import evaluate, flux_from_coefficients, flux_profile, solve_periodic_stokes
from periflux.oracles import (
    compare,
    compare_series,
    period_map_contraction,
    poiseuille_profile,
    swirl_decay_check,
    timestep_periodic,
    womersley_for_grid,
    womersley_radial,
)


@pytest.mark.parametrize("kind,measure", [("planar2d", lambda r: 2 * r), ("axisym", lambda r: np.pi * r**2)])
def test_poiseuille_flux_and_drive(kind, measure):
    r0, Q, nu = 1.3, 0.7, 0.4
    prof, drive = poiseuille_profile(kind, r0, Q, nu)
    r = np.linspace(0, r0, 20001)
    flux = 2 * np.trapezoid(prof(r), r) if kind == "planar2d" else np.trapezoid(2 * np.pi * r * prof(r), r)
    assert flux == pytest.approx(Q, rel=1e-8)
    assert prof(r0) == pytest.approx(0.0, abs=1e-15)
    # -nu Lap v = drive
    h = 1e-3
    lap = (prof(0.5 + h) - 2 * prof(0.5) + prof(0.5 - h)) / h**2
    if kind == "axisym":
        lap += (prof(0.5 + h) - prof(0.5 - h)) / (2 * h) / 0.5
    assert -nu * lap == pytest.approx(drive, rel=1e-6)
    assert measure(r0) > 0


@pytest.mark.parametrize("kind", ["planar2d", "axisym"])
def test_womersley_flux(kind):
    f = flux_from_coefficients(1.0, 0.4, [1.0, 0.2], [0.3, 0.0])
    res = womersley_radial(kind, 1.0, 0.5, 1.0, f)
    assert res.flux_error <= 1e-12
    assert res.K == 2
    assert np.all(np.abs(res.profiles[:, -1]) == 0)


def test_womersley_steady_is_poiseuille():
    f = flux_from_coefficients(1.0, 1.0)
    res = womersley_radial("axisym", 1.0, 1.0, 1.0, f, Nr=2048)
    prof, drive = poiseuille_profile("axisym", 1.0, 1.0, 1.0)
    r = np.linspace(0, 1, 50)
    assert np.max(np.abs(res.at(r, 0.0) - prof(r))) <= 1e-5
    assert res.drive[0].real == pytest.approx(drive, rel=1e-5)


def test_womersley_rejects_wavy_and_small_nr():
    f = flux_from_coefficients(1.0, 1.0, [1.0], [0.0])
    with pytest.raises(InvalidOracleUse):
        womersley_radial("axisym", 1.0, 1.0, 1.0, f, profile=make_profile("sinusoidal", eps=0.1, L=1.0))
    g = build_grid(make_profile("sinusoidal", eps=0.1, L=1.0), "axisym", 8, 8)
    with pytest.raises(InvalidOracleUse):
        womersley_for_grid(g, f, 1.0)
    with pytest.raises(InvalidParameter):
        womersley_radial("axisym", 1.0, 1.0, 1.0, f, Nr=128)
    with pytest.raises(InvalidParameter):
        womersley_radial("axisym", 1.0, -1.0, 1.0, f)


def test_boundary_layer_scaling():
    K = 8
    f = flux_from_coefficients(1.0, 0.0, [0.0] * (K - 1) + [1.0], [0.0] * K)
    nus = np.array([1e-4, 4e-4, 1.6e-3])
    d = [womersley_radial("axisym", 1.0, nu, 1.0, f, Nr=4096).boundary_layer_thickness(K) for nu in nus]
    slope = np.polyfit(np.log(nus), np.log(d), 1)[0]
    assert slope == pytest.approx(0.5, abs=0.05)


def test_timestep_zero_flux():
    g = build_grid(make_profile("straight"), "planar2d", 8, 8)
    ts = timestep_periodic(g, flux_from_coefficients(1.0, 0.0, [0.0], [0.0]), 1.0, 1 / 64)
    assert ts.periods == 1 and np.all(ts.states == 0) and np.all(ts.psi == 0)


def test_timestep_validation():
    g = build_grid(make_profile("straight"), "planar2d", 8, 8)
    f = flux_from_coefficients(1.0, 0.0, [1.0], [0.0])
    with pytest.raises(InvalidParameter):
        timestep_periodic(g, f, 1.0, 0.3)
    with pytest.raises(InvalidParameter):
        timestep_periodic(g, f, 1.0, 0.5)
    with pytest.raises(InvalidParameter):
        timestep_periodic(g, f, 0.0, 1 / 64)


def test_timestep_matches_harmonic(basis_for):
    g, b = basis_for("sinusoidal", "planar2d", 16, 48)
    f = flux_from_coefficients(1.0, 0.3, [1.0], [0.0])
    ts = timestep_periodic(g, f, 1.0, 1 / 128, tol=1e-9)
    sol = solve_periodic_stokes(g, b, f, 1.0)
    for i in (0, 40, 100):
        fp = flux_profile(g, ts.field(i))
        assert np.max(np.abs(fp.rows - f(ts.times[i]))) <= 1e-8
    d = compare(ts.field(40), evaluate(sol, ts.times[40]))
    assert d.rel_l2 <= 5e-3


def test_straight_contraction():
    g = build_grid(make_profile("straight"), "planar2d", 16, 16)
    # slowest Stokes mode in a unit half-width channel: nu (pi/2)^2
    rho = period_map_contraction(g, 1.0, 0.5, 1 / 128, smoothing=40)
    expected = np.exp(-(np.pi / 2) ** 2 * 0.5)
    assert abs(rho / expected - 1) <= 0.3


def test_swirl():
    g = build_grid(make_profile("straight"), "axisym", 16, 16)
    zero = swirl_decay_check(g, np.zeros(256), 1.0, 0.01, periods=0.1)
    assert np.all(zero.energies == 0) and zero.monotone
    rep = swirl_decay_check(g, np.random.default_rng(3).standard_normal(256), 0.5, 0.01, periods=0.5)
    assert rep.monotone and rep.midpoint_balance <= 1e-10
    assert rep.to_dict()["steps"] == 50
    with pytest.raises(IncompatibleField):
        swirl_decay_check(g, np.zeros(10), 1.0, 0.01)
    with pytest.raises(InvalidParameter):
        swirl_decay_check(build_grid(make_profile("straight"), "planar2d", 8, 8), np.zeros(64), 1.0, 0.01)


def test_compare(rng):
    g = build_grid(make_profile("straight"), "axisym", 8, 8)
    a = VectorField(g, rng.standard_normal((9, 8)), rng.standard_normal((8, 8)), rng.standard_normal((8, 8)))
    d = compare(a, a)
    assert d.rel_l2 == 0 and d.rel_max == 0
    assert compare(a * 1.1, a).rel_l2 == pytest.approx(0.1, rel=1e-12)
    assert compare_series(g, [a, a], [a, a]) == 0.0
    assert compare_series(g, [a * 2, a], [a, a]) == pytest.approx(np.sqrt(0.5), rel=1e-12)
    other = build_grid(make_profile("straight"), "axisym", 8, 8)
    with pytest.raises(IncompatibleField):
        compare(a, VectorField.zeros(other))
