"""CSV and JSON output with atomic writes."""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .fields import VectorField

__all__ = [
    "atomic_write_text",
    "write_json",
    "write_table",
    "read_table",
    "write_field",
    "read_field",
    "to_jsonable",
]


def atomic_write_text(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if np.isfinite(x) else str(x)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if hasattr(obj, "value") and hasattr(obj, "name"):  # enums
        return obj.value
    return obj


def write_json(path, data):
    text = json.dumps(to_jsonable(data), indent=2, sort_keys=True) + "\n"
    atomic_write_text(path, text)


def _fmt(x):
    return format(float(x), ".17g")


def write_table(path, header, columns):
    cols = [np.asarray(c, dtype=float).ravel() for c in columns]
    n = len(cols[0])
    if any(len(c) != n for c in cols):
        raise ValueError("columns differ in length")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in zip(*cols):
        w.writerow([_fmt(x) for x in row])
    atomic_write_text(path, buf.getvalue())


def read_table(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    data = np.array([[float(x) for x in r] for r in rows[1:]]).reshape(-1, len(header))
    return header, data


def write_field(stem, grid, field):
    """Write ``<stem>_xi_faces.csv`` and ``<stem>_zeta_faces.csv``.

    Columns are ``xi, zeta, x, z`` followed by the components on that lattice:
    stored ``U`` and physical ``v_t`` on xi-faces; ``v_z`` (and ``v_theta``)
    on zeta-faces.
    """
    stem = Path(stem)
    vt, vz, vth = field.physical()
    XI, ZE = grid.mesh("xface")
    X, Z = grid.physical_coords(XI, ZE)
    write_table(
        stem.with_name(stem.name + "_xi_faces.csv"),
        ["xi", "zeta", "x", "z", "U", "v_t"],
        [XI, ZE, X, Z, field.u, vt],
    )
    XI, ZE = grid.mesh("zface")
    X, Z = grid.physical_coords(XI, ZE)
    header = ["xi", "zeta", "x", "z", "v_z"]
    cols = [XI, ZE, X, Z, vz]
    if vth is not None:
        header.append("v_theta")
        cols.append(vth)
    write_table(stem.with_name(stem.name + "_zeta_faces.csv"), header, cols)


def read_field(stem, grid):
    """Inverse of :func:`write_field` (bit-exact round trip)."""
    stem = Path(stem)
    _, a = read_table(stem.with_name(stem.name + "_xi_faces.csv"))
    h, b = read_table(stem.with_name(stem.name + "_zeta_faces.csv"))
    u = a[:, 4].reshape(grid.n_xi + 1, grid.n_zeta)
    w = b[:, 4].reshape(grid.n_xi, grid.n_zeta)
    th = b[:, 5].reshape(grid.n_xi, grid.n_zeta) if "v_theta" in h else None
    return VectorField(grid, u, w, th)
