import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from diffwaves.config import ConfigError, ExperimentConfig
from diffwaves.io import config_hash, read_csv, read_json, write_field_csv, write_json, write_series_csv


def test_defaults(default_cfg, params):
    r = default_cfg.raw
    assert r["run"]["t_end"] == 800.0 and r["grid"]["dx"] == 0.05
    assert default_cfg.params().to_dict() == params.to_dict()
    g = default_cfg.grid()
    assert g.x_max >= params.c * 801 + 12 * 801**0.5
    ck = default_cfg.checkpoints()
    assert ck[0] == 1.0 and ck[-1] == 800.0


@pytest.mark.parametrize("override, field", [
    ({"model": {"nu": -1.0}}, "model.nu"),
    ({"model": {"law": "ideal"}}, "model.law"),
    ({"data": {"kind": "box"}}, "data.kind"),
    ({"data": {"a_u": 0.9}}, "data.a_u"),
    ({"grid": {"dx": 0.0}}, "grid.dx"),
    ({"run": {"cfl": 1.5}}, "run.cfl"),
    ({"run": {"n": 3, "n_max": 2}}, "run.n"),
    ({"run": {"times": [5.0, 1.0]}}, "run.times"),
    ({"green": {"sigma_cells": 2.0}}, "green.sigma_cells"),
    ({"verify": {"window": [800.0, 50.0]}}, "verify.window"),
    ({"verify": {"suite": "everything"}}, "verify.suite"),
    ({"grid": {"half_width": 10.0}}, "grid.half_width"),
    ({"bad": {}}, "bad"),
    ({"run": {"t_endd": 3.0}}, "run.t_endd"),
])
def test_field_level_errors(override, field):
    with pytest.raises(ConfigError, match=field.replace(".", r"\.")):
        ExperimentConfig.from_dict(override)


def test_toml_round_trip(tmp_path):
    p = tmp_path / "exp.toml"
    p.write_text('[data]\nkind = "gaussian"\na_u = 0.01\n\n[run]\nt_end = 20.0\ntimes = [5.0, 10.0, 20.0]\n'
                 '\n[verify]\nsuite = "waves-only"\nwindow = [5.0, 20.0]\n')
    cfg = ExperimentConfig.from_toml(p)
    assert cfg.raw["data"]["kind"] == "gaussian" and cfg.raw["data"]["a_u"] == 0.01
    assert cfg.checkpoints() == [5.0, 10.0, 20.0]
    assert cfg.raw["grid"]["dx"] == 0.05
    assert ExperimentConfig.from_dict(cfg.to_dict()).raw == cfg.raw


def test_toml_syntax_error(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text("[run\nt_end = 3")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_toml(p)


def test_half_width_accepted_above_bound(params):
    cfg = ExperimentConfig.from_dict({"run": {"t_end": 10.0}, "grid": {"half_width": 100.0}})
    assert cfg.grid().x_max == pytest.approx(100.0, abs=0.05)


def test_tabulated_law_config():
    v = np.linspace(0.5, 2.0, 50)
    cfg = ExperimentConfig.from_dict({"model": {"law": "table", "v": v.tolist(), "p": (v**-1.4).tolist()}})
    assert cfg.params().c == pytest.approx(1.4**0.5, rel=1e-5)


@given(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=1, max_size=20))
def test_csv_float_round_trip(tmp_path_factory, vals):
    p = tmp_path_factory.mktemp("csv") / "s.csv"
    t = np.arange(len(vals), dtype=float)
    write_series_csv(p, t, {"a": np.array(vals)})
    header, data = read_csv(p)
    assert header == ["t", "a"]
    np.testing.assert_array_equal(data[:, 1], np.array(vals))


def test_field_csv(tmp_path):
    x = np.linspace(0, 1, 5)
    write_field_csv(tmp_path / "f.csv", x, x**2, header=("x", "u"))
    header, data = read_csv(tmp_path / "f.csv")
    assert header == ["x", "u"]
    np.testing.assert_array_equal(data[:, 1], x**2)


def test_json_deterministic_and_exact(tmp_path):
    obj = {"b": np.float64(0.1) + np.float64(0.2), "a": [np.int64(3), np.bool_(True)], "c": float("nan")}
    write_json(tmp_path / "a.json", obj)
    write_json(tmp_path / "b.json", dict(reversed(list(obj.items()))))
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    back = read_json(tmp_path / "a.json")
    assert back["b"] == 0.1 + 0.2 and back["a"] == [3, True] and back["c"] == "nan"


def test_config_hash(default_cfg):
    d = default_cfg.to_dict()
    assert config_hash(d) == config_hash(json.loads(json.dumps(d)))
    d["grid"]["dx"] = 0.1
    assert config_hash(d) != config_hash(default_cfg.to_dict())
