"""Batch front end: ``periflux run`` and ``periflux validate``.

Only the standard library is imported at module level so that the thread
count can be fixed before numpy loads its BLAS.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import os
import sys
import time
from pathlib import Path

log = logging.getLogger("periflux")

TASKS = ("eig", "stokes", "ns", "oracle-compare", "swirl-check", "estimates")
DEPENDS = {
    "eig": (),
    "stokes": ("eig",),
    "ns": ("eig",),
    "oracle-compare": ("stokes",),
    "swirl-check": (),
    "estimates": ("stokes",),
}

DEFAULTS = {
    "geometry": {
        "kind": "axisym",
        "profile": {"kind": "straight", "r0": 1.0, "eps": 0.0, "L": 1.0, "samples": None},
        "n_xi": 32,
        "n_zeta": 32,
    },
    "physics": {"nu": 1.0, "T": 1.0, "flux": {"type": "constant", "value": 1.0}},
    "solver": {
        "m": 32,
        "K": None,
        "eig_tol": 1e-8,
        "proj_tol": 1e-10,
        "ns_tol": 1e-10,
        "maxit": 50,
        "seed": 0,
        "steps_per_period": None,
        "max_periods": 50,
        "oracle_nr": 1024,
        "snapshots": 4,
        "swirl_dt": 0.01,
    },
    "tasks": ["eig"],
    "output": "periflux_out",
}

FLUX_KEYS = {
    "constant": {"type", "value"},
    "cosine": {"type", "mean", "amplitude", "harmonic", "phase"},
    "fourier": {"type", "p0", "p", "q"},
    "table": {"type", "samples"},
}

EXIT_OK, EXIT_ASSERT, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3


class _ConfigError(Exception):
    def __init__(self, message, key):
        super().__init__(message)
        self.key = key


def _merge(default, given, path):
    if not isinstance(given, dict):
        raise _ConfigError(f"{path or 'config'} must be an object", path or "config")
    out = copy.deepcopy(default)
    for k, v in given.items():
        key = f"{path}.{k}" if path else k
        if k not in default:
            raise _ConfigError(f"unknown key {key!r}", key)
        if isinstance(default[k], dict) and k != "flux":
            out[k] = _merge(default[k], v, key)
        else:
            out[k] = v
    return out


def _positive(cfg, path):
    node = cfg
    for part in path.split("."):
        node = node[part]
    if isinstance(node, bool) or not isinstance(node, (int, float)) or not node > 0:
        raise _ConfigError(f"{path} must be a positive number", path)


def _check_flux(flux):
    if not isinstance(flux, dict) or flux.get("type") not in FLUX_KEYS:
        raise _ConfigError("physics.flux.type must be one of " + ", ".join(FLUX_KEYS), "physics.flux.type")
    extra = set(flux) - FLUX_KEYS[flux["type"]]
    if extra:
        key = sorted(extra)[0]
        raise _ConfigError(f"unknown key 'physics.flux.{key}'", f"physics.flux.{key}")
    if flux["type"] == "table":
        s = flux.get("samples")
        if not isinstance(s, list) or len(s) < 4:
            raise _ConfigError("physics.flux.samples needs at least 4 values", "physics.flux.samples")
    if flux["type"] == "cosine":
        h = flux.get("harmonic", 1)
        if not isinstance(h, int) or h < 1:
            raise _ConfigError("physics.flux.harmonic must be a positive integer", "physics.flux.harmonic")


def load_config(path):
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise _ConfigError(f"cannot read config: {exc}", "config") from None
    except json.JSONDecodeError as exc:
        raise _ConfigError(f"invalid JSON: {exc}", "config") from None
    cfg = _merge(DEFAULTS, raw, "")
    for p in ("physics.nu", "physics.T", "solver.eig_tol", "solver.proj_tol", "solver.ns_tol",
              "solver.maxit", "solver.m", "geometry.n_xi", "geometry.n_zeta", "solver.swirl_dt",
              "solver.max_periods", "solver.oracle_nr"):
        _positive(cfg, p)
    for p in ("solver.m", "solver.maxit", "geometry.n_xi", "geometry.n_zeta", "solver.seed"):
        sec, k = p.split(".")
        if not isinstance(cfg[sec][k], int) or isinstance(cfg[sec][k], bool):
            raise _ConfigError(f"{p} must be an integer", p)
    if cfg["solver"]["K"] is not None and (not isinstance(cfg["solver"]["K"], int) or cfg["solver"]["K"] < 1):
        raise _ConfigError("solver.K must be a positive integer or null", "solver.K")
    _check_flux(cfg["physics"]["flux"])
    tasks = cfg["tasks"]
    if not isinstance(tasks, list) or not tasks:
        raise _ConfigError("tasks must be a non-empty list", "tasks")
    for t in tasks:
        if t not in TASKS:
            raise _ConfigError(f"unknown task {t!r}", "tasks")
    if "swirl-check" in tasks and str(cfg["geometry"]["kind"]).lower() != "axisym":
        raise _ConfigError("swirl-check needs geometry.kind = axisym", "tasks")
    return cfg


def task_order(tasks):
    """Requested tasks plus prerequisites, in dependency order."""
    need = set()

    def add(t):
        if t in need:
            return
        for d in DEPENDS[t]:
            add(d)
        need.add(t)

    for t in tasks:
        add(t)
    return [t for t in TASKS if t in need]


def _set_threads(n):
    if n is None:
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(n)


def _error_json(code, message, key=None, **extra):
    out = {"error": code, "message": message}
    if key is not None:
        out["key"] = key
    out.update(extra)
    return out


def _build_parser():
    p = argparse.ArgumentParser(prog="periflux", description="Periodic flux-driven pipe flow solver")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run the configured tasks and write artifacts")
    run.add_argument("config")
    run.add_argument("--out", default=None, help="output directory (overrides config)")
    run.add_argument("--threads", type=int, default=None)
    run.add_argument("--verbose", action="store_true")
    val = sub.add_parser("validate", help="run the assertion suite only")
    val.add_argument("config")
    val.add_argument("--threads", type=int, default=None)
    val.add_argument("--verbose", action="store_true")
    return p


def main(argv=None):
    args = _build_parser().parse_args(argv)
    threads = args.threads
    if threads is None and os.environ.get("PERIFLUX_THREADS"):
        try:
            threads = int(os.environ["PERIFLUX_THREADS"])
        except ValueError:
            threads = None
    _set_threads(threads)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
    except _ConfigError as exc:
        print(json.dumps(_error_json("config-parse-error", str(exc), exc.key)), file=sys.stderr)
        return EXIT_CONFIG

    from .exceptions import PerifluxError
    from .pipeline import run_tasks

    write = args.command == "run"
    out = Path(args.out or cfg["output"]) if write else None
    try:
        summary, timing = run_tasks(cfg, out)
    except PerifluxError as exc:
        code = EXIT_CONFIG if exc.code in ("invalid-parameter", "invalid-geometry") else EXIT_SOLVER
        err = _error_json(exc.code, str(exc), getattr(exc, "key", None))
        if getattr(exc, "residual", None) is not None:
            err["residual"] = exc.residual
        print(json.dumps(err), file=sys.stderr)
        if out is not None:
            from .io import write_json

            write_json(out / "error.json", err)
        return code
    failed = [name for name, ok in summary["assertions"].items() if not ok]
    if write:
        from .io import write_json

        write_json(out / "summary.json", summary)
        write_json(out / "timing.json", timing)
    else:
        from .io import to_jsonable

        print(json.dumps(to_jsonable({"assertions": summary["assertions"]}), indent=2, sort_keys=True))
    if failed:
        print(json.dumps(_error_json("assertion-failure", "failed: " + ", ".join(failed))),
              file=sys.stderr)
        return EXIT_ASSERT
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
