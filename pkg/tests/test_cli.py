import json

import numpy as np
import pytest

from periflux.cli import DEFAULTS, _ConfigError, load_config, main, task_order
from periflux.geometry import build_grid, make_profile
from periflux.io import read_field, read_table


def write_config(tmp_path, **sections):
    cfg = {"geometry": {"kind": "axisym", "profile": {"kind": "straight"}, "n_xi": 16, "n_zeta": 16},
           "solver": {"m": 8}, "tasks": ["eig"]}
    for k, v in sections.items():
        if isinstance(v, dict) and isinstance(cfg.get(k), dict):
            cfg[k] = {**cfg[k], **v}
        else:
            cfg[k] = v
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return path


def test_eig_smoke(tmp_path):
    out = tmp_path / "out"
    assert main(["run", str(write_config(tmp_path)), "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    lam = summary["eig"]["eigenvalues"]
    assert len(lam) == 8 and all(a <= b for a, b in zip(lam, lam[1:])) and lam[0] > 0
    assert all(summary["assertions"].values())
    assert (out / "timing.json").exists()
    assert len(list((out / "basis").glob("eigenfield_*_zeta_faces.csv"))) == 8


def test_summary_deterministic(tmp_path):
    cfg = write_config(tmp_path, tasks=["stokes"], physics={"flux": {"type": "cosine", "mean": 0.5, "amplitude": 1.0}})
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", str(cfg), "--out", str(a)]) == 0
    assert main(["run", str(cfg), "--out", str(b)]) == 0
    assert (a / "summary.json").read_bytes() == (b / "summary.json").read_bytes()
    assert (a / "psi.csv").read_bytes() == (b / "psi.csv").read_bytes()


def test_psi_csv_recomputable(tmp_path):
    out = tmp_path / "out"
    cfg = write_config(tmp_path, tasks=["stokes"], physics={"flux": {"type": "constant", "value": 1.0}})
    assert main(["run", str(cfg), "--out", str(out)]) == 0
    header, data = read_table(out / "psi.csv")
    summary = json.loads((out / "summary.json").read_text())
    assert header == ["t", "psi", "g"]
    assert np.allclose(data[:, 1], summary["stokes"]["psi_cos"][0], rtol=1e-12)
    g = build_grid(make_profile("straight"), "axisym", 16, 16)
    v = read_field(out / "stokes" / "snapshot_000", g)
    assert np.all(v.theta == 0)


def test_negative_nu(tmp_path, capsys):
    cfg = write_config(tmp_path, physics={"nu": -1.0})
    assert main(["run", str(cfg), "--out", str(tmp_path / "o")]) == 2
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "config-parse-error" and err["key"] == "physics.nu"


@pytest.mark.parametrize(
    "patch,key",
    [
        ({"solver": {"m": 2.5}}, "solver.m"),
        ({"tasks": ["bogus"]}, "tasks"),
        ({"physics": {"flux": {"type": "cosine", "amp": 1.0}}}, "physics.flux.amp"),
        ({"colour": 1}, "colour"),
    ],
)
def test_config_errors(tmp_path, patch, key):
    with pytest.raises(_ConfigError) as exc:
        load_config(write_config(tmp_path, **patch))
    assert exc.value.key == key


def test_unreadable_config(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["validate", str(bad)]) == 2
    assert main(["validate", str(tmp_path / "missing.json")]) == 2


def test_task_order():
    assert task_order(["oracle-compare"]) == ["eig", "stokes", "oracle-compare"]
    assert task_order(["swirl-check", "eig"]) == ["eig", "swirl-check"]
    assert DEFAULTS["tasks"] == ["eig"]


def test_validate_prints_assertions(tmp_path, capsys):
    assert main(["validate", str(write_config(tmp_path))]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["assertions"]["eig.gram"] is True
    assert not (tmp_path / "periflux_out").exists()


def test_solver_failure_exit(tmp_path, capsys):
    cfg = write_config(
        tmp_path,
        geometry={"profile": {"kind": "sinusoidal", "eps": 0.2, "L": 2.0}},
        physics={"nu": 0.05, "flux": {"type": "cosine", "mean": 50.0, "amplitude": 50.0}},
        solver={"m": 8, "maxit": 30},
        tasks=["ns"],
    )
    out = tmp_path / "o"
    assert main(["run", str(cfg), "--out", str(out)]) == 3
    err = json.loads((out / "error.json").read_text())
    assert err["error"] == "divergence-detected"


def test_straight_cosine_oracle_compare(tmp_path):
    cfg = write_config(
        tmp_path,
        geometry={"kind": "axisym", "profile": {"kind": "straight", "L": 0.2}, "n_xi": 64, "n_zeta": 64},
        physics={"nu": 1.0, "T": 1.0, "flux": {"type": "cosine", "mean": 0.0, "amplitude": 1.0}},
        solver={"m": 64},
        tasks=["stokes", "oracle-compare"],
    )
    out = tmp_path / "o"
    assert main(["run", str(cfg), "--out", str(out), "--threads", "1"]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["oracle"]["rel_l2_space_time"] <= 1e-3


def test_swirl_check_task(tmp_path):
    out = tmp_path / "o"
    assert main(["run", str(write_config(tmp_path, tasks=["swirl-check"])), "--out", str(out)]) == 0
    s = json.loads((out / "summary.json").read_text())["swirl"]
    assert s["monotone"] and s["final_ratio"] <= 1e-10
