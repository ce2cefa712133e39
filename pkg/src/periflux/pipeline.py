"""Task orchestration behind the command line."""

from __future__ import annotations

import logging
import time

import numpy as np

from .cli import task_order
from .fields import operators
from .geometry import build_grid, make_profile
from .harmonic import (
    estimate_checks,
    evaluate,
    flux_fourier,
    flux_from_coefficients,
    flux_profile,
    recover_psi,
    solve_periodic_stokes,
    verify_estimates,
)
from .io import write_field, write_table
from .nonlinear import solve_ns
from .oracles import (
    compare_series,
    period_map_contraction,
    swirl_decay_check,
    timestep_periodic,
    womersley_for_grid,
)
from .spectrum import bar_e_norm, build_basis

log = logging.getLogger("periflux")

__all__ = ["run_tasks", "make_flux"]

FLUX_TOL = 1e-8
WOMERSLEY_TOL = 1e-3
ORBIT_TOL = 1e-2
CONTRACTION_TOL = 0.3
NS_RESIDUAL_TOL = 1e-6
SWIRL_TOL = 1e-12


def make_flux(spec, T, K=None):
    kind = spec["type"]
    if kind == "constant":
        return flux_from_coefficients(T, float(spec["value"]), [0.0], [0.0])
    if kind == "cosine":
        h = int(spec.get("harmonic", 1))
        amp = float(spec.get("amplitude", 1.0))
        ph = float(spec.get("phase", 0.0))
        p = np.zeros(h)
        q = np.zeros(h)
        p[h - 1] = amp * np.cos(ph)
        q[h - 1] = -amp * np.sin(ph)
        return flux_from_coefficients(T, float(spec.get("mean", 0.0)), p, q)
    if kind == "fourier":
        return flux_from_coefficients(T, float(spec.get("p0", 0.0)), spec.get("p", []), spec.get("q", []))
    return flux_fourier(np.asarray(spec["samples"], dtype=float), K, T)


def _profile(cfg):
    p = cfg["geometry"]["profile"]
    return make_profile(p["kind"], r0=p["r0"], eps=p["eps"], L=p["L"], samples=p.get("samples"))


def _flux_check(grid, sol, flux, n_times):
    worst = 0.0
    gmax = max(float(np.max(np.abs(flux(np.linspace(0, flux.T, 256, endpoint=False))))), 1e-300)
    for t in sol.sample_times(n_times):
        rows = flux_profile(grid, evaluate(sol, t)).rows
        worst = max(worst, float(np.max(np.abs(rows - flux(t)))) / gmax)
    return worst


def run_tasks(cfg, out=None):
    """Execute the configured tasks; returns ``(summary, timing)``.

    Artifacts go to ``out`` when given.  ``summary['assertions']`` maps
    assertion names to booleans.
    """
    timing = {}
    solver = cfg["solver"]
    phys = cfg["physics"]
    tasks = task_order(cfg["tasks"])
    t0 = time.perf_counter()
    prof = _profile(cfg)
    grid = build_grid(prof, cfg["geometry"]["kind"], cfg["geometry"]["n_xi"], cfg["geometry"]["n_zeta"])
    nu, T = float(phys["nu"]), float(phys["T"])
    flux = make_flux(phys["flux"], T, solver["K"])
    if solver["K"] is not None:
        flux = flux.with_K(solver["K"])
    timing["grid"] = time.perf_counter() - t0
    summary = {
        "config": cfg,
        "grid": {"kind": grid.kind.value, "n_xi": grid.n_xi, "n_zeta": grid.n_zeta,
                 "measure_raw": grid.measure_raw, "profile": prof.to_dict()},
        "flux": flux.to_dict(),
        "assertions": {},
    }
    checks = summary["assertions"]
    basis = sol = None
    for task in tasks:
        t0 = time.perf_counter()
        log.info("task %s", task)
        if task == "eig":
            basis = build_basis(grid, m=solver["m"], tol=solver["eig_tol"], seed=solver["seed"],
                                proj_tol=solver["proj_tol"])
            s = basis.summary()
            s["gram_error"] = basis.gram_error()
            s["bar_e_norm"] = bar_e_norm(basis)
            summary["eig"] = s
            checks["eig.residuals"] = bool(np.max(basis.residuals) <= solver["eig_tol"] * max(1.0, float(np.max(basis.eigenvalues))))
            checks["eig.gram"] = s["gram_error"] <= 1e-10
            checks["eig.bar_e_below_one"] = s["bar_e_norm"] < 1.0
            if out is not None:
                for j in range(basis.m):
                    write_field(out / "basis" / f"eigenfield_{j + 1:03d}", grid, basis.field(j))
        elif task == "stokes":
            sol = solve_periodic_stokes(grid, basis, flux, nu)
            n_t = max(16, 8 * flux.K)
            times = sol.sample_times(n_t)
            psi = recover_psi(sol, times=times)
            worst = _flux_check(grid, sol, flux, n_t)
            modes = estimate_checks(sol)
            theta = 0.0
            if grid.axisym:
                theta = max(float(np.max(np.abs(evaluate(sol, t).theta))) for t in times)
            summary["stokes"] = {
                "c_tilde": sol.c_tilde,
                "K": sol.K,
                "flux_error": worst,
                "modes": modes,
                "psi_cos": psi["cos"],
                "psi_sin": psi["sin"],
                "swirl_max": theta,
                "constants": {"C0sq": basis.C0sq, "C1sq": basis.C1sq, "Pe_z_norm": basis.Pe_z_norm,
                              "bar_e_norm": bar_e_norm(basis)},
            }
            checks["stokes.flux"] = worst <= FLUX_TOL
            checks["stokes.modes"] = all(m["residual"] <= 1e-10 for m in modes)
            if grid.axisym:
                checks["stokes.swirl_zero"] = theta <= SWIRL_TOL
            if out is not None:
                write_table(out / "psi.csv", ["t", "psi", "g"], [times, psi["samples"], flux(times)])
                for i, t in enumerate(sol.sample_times(solver["snapshots"])):
                    write_field(out / "stokes" / f"snapshot_{i:03d}", grid, evaluate(sol, t))
        elif task == "ns":
            w, rep = solve_ns(grid, basis, flux, nu, solver["ns_tol"], solver["maxit"])
            d = rep.to_dict()
            d["flux_error"] = _flux_check(grid, w, flux, max(16, 8 * flux.K))
            summary["ns"] = d
            checks["ns.converged"] = rep.converged
            checks["ns.momentum"] = rep.momentum_residual <= NS_RESIDUAL_TOL
            checks["ns.flux"] = d["flux_error"] <= FLUX_TOL
            if out is not None:
                for i, t in enumerate(w.sample_times(solver["snapshots"])):
                    write_field(out / "ns" / f"snapshot_{i:03d}", grid, evaluate(w, t))
        elif task == "oracle-compare":
            summary["oracle"] = _oracle(grid, basis, sol, flux, nu, solver, checks)
        elif task == "estimates":
            summary["estimates"] = verify_estimates(sol).to_dict()
        elif task == "swirl-check":
            ops = operators(grid)
            rng = np.random.default_rng(solver["seed"])
            th0 = rng.standard_normal(ops.n_t)
            rep = swirl_decay_check(grid, th0, nu, solver["swirl_dt"], periods=1e3, T=1.0,
                                    stop_ratio=1e-10)
            summary["swirl"] = rep.to_dict()
            checks["swirl.monotone"] = rep.monotone
            checks["swirl.decay"] = rep.final_ratio <= 1e-10
        timing[task] = time.perf_counter() - t0
    return summary, timing


def _oracle(grid, basis, sol, flux, nu, solver, checks):
    T = flux.T
    if grid.profile.is_straight:
        orc = womersley_for_grid(grid, flux, nu, solver["oracle_nr"])
        times = sol.sample_times(max(16, 8 * flux.K))
        err = compare_series(grid, [evaluate(sol, t) for t in times], [orc.to_field(grid, t) for t in times])
        checks["oracle.womersley"] = err <= WOMERSLEY_TOL
        return {"kind": "radial", "rel_l2_space_time": err, "oracle_flux_error": orc.flux_error}
    n = solver["steps_per_period"] or 64 * max(flux.K, 2)
    dt = T / n
    ts = timestep_periodic(grid, flux, nu, dt, solver["max_periods"], tol=1e-9)
    err = compare_series(grid, [evaluate(sol, t) for t in ts.times], list(ts.states))
    rho = period_map_contraction(grid, nu, T, dt, seed=solver["seed"])
    expected = float(np.exp(-nu * basis.eigenvalues[0] * T))
    dev = abs(rho - expected) / expected
    checks["oracle.orbit"] = err <= ORBIT_TOL
    checks["oracle.contraction"] = dev <= CONTRACTION_TOL
    return {"kind": "time-stepping", "rel_l2_time": err, "periods": ts.periods, "gap": ts.gap,
            "contraction": rho, "expected_contraction": expected, "contraction_deviation": dev}


