import json

import numpy as np
import pytest

from periflux.fields import VectorField
from periflux.geometry import build_grid, make_profile
from periflux.io import atomic_write_text, read_field, read_table, to_jsonable, write_field, write_json, write_table


@pytest.mark.parametrize("kind", ["planar2d", "axisym"])
def test_field_round_trip_is_exact(tmp_path, rng, kind):
    g = build_grid(make_profile("sinusoidal", eps=0.3, L=1.5), kind, 8, 10)
    th = rng.standard_normal((8, 10)) if g.axisym else None
    v = VectorField(g, rng.standard_normal((9, 10)) * 1e-7, rng.standard_normal((8, 10)) / 3, th)
    write_field(tmp_path / "snap", g, v)
    back = read_field(tmp_path / "snap", g)
    assert np.array_equal(back.flat(), v.flat())
    header, _ = read_table(tmp_path / "snap_xi_faces.csv")
    assert header[:4] == ["xi", "zeta", "x", "z"]


def test_table_round_trip(tmp_path):
    x = np.array([0.1, 1 / 3, np.pi, -2e-300])
    write_table(tmp_path / "t.csv", ["a", "b"], [x, 2 * x])
    header, data = read_table(tmp_path / "t.csv")
    assert header == ["a", "b"] and np.array_equal(data[:, 0], x)
    with pytest.raises(ValueError):
        write_table(tmp_path / "bad.csv", ["a", "b"], [x, x[:2]])


def test_atomic_write_leaves_no_temp(tmp_path):
    atomic_write_text(tmp_path / "sub" / "f.txt", "hello")
    assert (tmp_path / "sub" / "f.txt").read_text() == "hello"
    assert [p.name for p in (tmp_path / "sub").iterdir()] == ["f.txt"]


def test_jsonable(tmp_path):
    data = {"a": np.float64(1.5), "b": np.arange(3), "c": np.bool_(True), 1: float("inf")}
    write_json(tmp_path / "x.json", data)
    back = json.loads((tmp_path / "x.json").read_text())
    assert back == {"a": 1.5, "b": [0, 1, 2], "c": True, "1": "inf"}
    assert to_jsonable((np.int64(2),)) == [2]
