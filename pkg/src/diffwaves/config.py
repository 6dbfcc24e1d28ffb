"""Experiment configuration (TOML) with field-level validation.

Grammar (every section and key optional; defaults shown)::

    [model]
    law = "gamma"          # or "table" with v = [...], p = [...]
    gamma = 1.4
    nu = 1.0

    [data]
    kind = "diffusion_wave"  # gaussian | dgaussian | diffusion_wave
    a_v = 0.0
    a_u = 0.018806319451591879   # eps ~ 0.02 for the default law
    width = 1.0

    [grid]
    dx = 0.05
    margin = 12.0          # half-width >= c (t_end + 1) + margin sqrt(t_end + 1)
    half_width = 0.0       # 0 = auto; otherwise at least the auto value

    [run]
    t_end = 800.0
    t0 = 1.0               # geometric checkpoints t0 * ratio**k
    ratio = 1.189207115002721
    times = []             # explicit checkpoints instead of the geometric rule
    n = 1                  # expansion depth of the remainder
    n_max = 2              # cascade depth
    cfl = 0.8

    [green]
    t_end = 100.0
    sigma_cells = 5.0
    window = [5.0, 100.0]

    [verify]
    suite = "headline-n1"
    window = [50.0, 800.0]
    collapse_t = 400.0
    oracle_points = 20
"""

from __future__ import annotations

import copy
import math
import sys
from dataclasses import dataclass, field

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .cascade import geometric_checkpoints
from .model import Grid1D, PressureLaw, derive_params

SUITES = ("waves-only", "cascade", "headline-n1", "green", "identity", "all")

DEFAULTS = {
    "model": {"law": "gamma", "gamma": 1.4, "nu": 1.0, "v": [], "p": []},
    "data": {"kind": "diffusion_wave", "a_v": 0.0, "a_u": 0.018806319451591879, "width": 1.0},
    "grid": {"dx": 0.05, "margin": 12.0, "half_width": 0.0},
    "run": {"t_end": 800.0, "t0": 1.0, "ratio": 2 ** 0.25, "times": [], "n": 1, "n_max": 2,
            "cfl": 0.8},
    "green": {"t_end": 100.0, "sigma_cells": 5.0, "window": [5.0, 100.0]},
    "verify": {"suite": "headline-n1", "window": [50.0, 800.0], "collapse_t": 400.0,
               "oracle_points": 20},
}


class ConfigError(ValueError):
    pass


def _merge(base: dict, over: dict, path=""):
    out = copy.deepcopy(base)
    for k, v in over.items():
        where = f"{path}{k}"
        if k not in base:
            raise ConfigError(f"{where}: unknown key")
        if isinstance(base[k], dict):
            if not isinstance(v, dict):
                raise ConfigError(f"{where}: expected a section")
            out[k] = _merge(base[k], v, where + ".")
        else:
            out[k] = v
    return out


def _num(d, sec, key, lo=None, hi=None, strict=True, integer=False):
    v = d[sec][key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{sec}.{key}: expected a number, got {v!r}")
    if integer and int(v) != v:
        raise ConfigError(f"{sec}.{key}: expected an integer")
    if not math.isfinite(v):
        raise ConfigError(f"{sec}.{key}: must be finite")
    if lo is not None and (v <= lo if strict else v < lo):
        raise ConfigError(f"{sec}.{key}: must be {'>' if strict else '>='} {lo}")
    if hi is not None and v > hi:
        raise ConfigError(f"{sec}.{key}: must be <= {hi}")
    return int(v) if integer else float(v)


@dataclass
class ExperimentConfig:
    raw: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))

    def __post_init__(self):
        self.validate()

    @classmethod
    def from_dict(cls, d: dict | None = None) -> "ExperimentConfig":
        return cls(_merge(DEFAULTS, d or {}))

    @classmethod
    def from_toml(cls, path) -> "ExperimentConfig":
        with open(path, "rb") as fh:
            try:
                d = tomllib.load(fh)
            except tomllib.TOMLDecodeError as e:
                raise ConfigError(f"{path}: {e}") from None
        return cls.from_dict(d)

    def validate(self):
        d = self.raw
        law = d["model"]["law"]
        if law not in ("gamma", "table"):
            raise ConfigError("model.law: must be 'gamma' or 'table'")
        if law == "gamma":
            _num(d, "model", "gamma", lo=1.0)
        elif len(d["model"]["v"]) < 4 or len(d["model"]["v"]) != len(d["model"]["p"]):
            raise ConfigError("model.v/model.p: need matching tables of at least 4 points")
        _num(d, "model", "nu", lo=0.0)
        if d["data"]["kind"] not in ("gaussian", "dgaussian", "diffusion_wave"):
            raise ConfigError("data.kind: must be gaussian, dgaussian or diffusion_wave")
        for k in ("a_v", "a_u"):
            _num(d, "data", k, lo=-0.5, hi=0.5)
        _num(d, "data", "width", lo=0.0)
        _num(d, "grid", "dx", lo=0.0)
        _num(d, "grid", "margin", lo=0.0, strict=False)
        _num(d, "grid", "half_width", lo=0.0, strict=False)
        _num(d, "run", "t_end", lo=0.0)
        _num(d, "run", "t0", lo=0.0)
        _num(d, "run", "ratio", lo=1.0)
        _num(d, "run", "n", lo=0, strict=False, integer=True)
        _num(d, "run", "n_max", lo=1, strict=False, integer=True)
        _num(d, "run", "cfl", lo=0.0, hi=1.0)
        if d["run"]["n"] > d["run"]["n_max"]:
            raise ConfigError("run.n: exceeds run.n_max")
        ts = d["run"]["times"]
        if not isinstance(ts, list) or any(not isinstance(t, (int, float)) for t in ts):
            raise ConfigError("run.times: expected a list of numbers")
        if ts and (sorted(ts) != list(ts) or ts[0] < 0 or ts[-1] > d["run"]["t_end"]):
            raise ConfigError("run.times: must be increasing and within [0, t_end]")
        _num(d, "green", "t_end", lo=0.0)
        _num(d, "green", "sigma_cells", lo=3.0, strict=False)
        for sec in ("green", "verify"):
            w = d[sec]["window"]
            if not (isinstance(w, list) and len(w) == 2 and 0 <= w[0] < w[1]):
                raise ConfigError(f"{sec}.window: expected [t_lo, t_hi] with t_lo < t_hi")
        if d["verify"]["suite"] not in SUITES:
            raise ConfigError(f"verify.suite: unknown suite {d['verify']['suite']!r}; choose from {SUITES}")
        _num(d, "verify", "oracle_points", lo=1, strict=False, integer=True)
        hw = d["grid"]["half_width"]
        if hw:
            p = self.params()
            t = d["run"]["t_end"]
            need = p.c * (t + 1) + d["grid"]["margin"] * math.sqrt(t + 1)
            if hw < need:
                raise ConfigError(f"grid.half_width: {hw} is below the auto-sizing bound {need:.3f}")

    # --- derived objects ---
    def law(self) -> PressureLaw:
        m = self.raw["model"]
        if m["law"] == "gamma":
            return PressureLaw.gamma_law(m["gamma"])
        return PressureLaw.tabulated(m["v"], m["p"])

    def params(self):
        return derive_params(self.law(), self.raw["model"]["nu"])

    def grid(self, t_end: float | None = None) -> Grid1D:
        g = self.raw["grid"]
        t = self.raw["run"]["t_end"] if t_end is None else t_end
        p = self.params()
        hw = max(g["half_width"], p.c * (t + 1) + g["margin"] * math.sqrt(t + 1))
        return Grid1D.symmetric(hw, g["dx"])

    def checkpoints(self) -> list[float]:
        r = self.raw["run"]
        if r["times"]:
            return [float(t) for t in r["times"]]
        return geometric_checkpoints(r["t_end"], r["t0"], r["ratio"])

    def with_suite(self, suite: str) -> "ExperimentConfig":
        d = copy.deepcopy(self.raw)
        d["verify"]["suite"] = suite
        return ExperimentConfig(d)

    def to_dict(self) -> dict:
        return copy.deepcopy(self.raw)
