"""Shared fixtures.

The expensive runs (t = 800 cascade and nonlinear solve on the default
experiment, the t = 100 Xi run and the Green's function) are computed once
per session and reused by the module tests and the acceptance suite.
"""

import numpy as np
import pytest

from diffwaves.cascade import geometric_checkpoints, solve_cascade
from diffwaves.config import ExperimentConfig
from diffwaves.greens import numerical_green
from diffwaves.model import derive_params
from diffwaves.pde import solve_p_system
from diffwaves.verify import XI_SUM_DEPTH, XI_SUM_T, cascade_claims, initial_data

ACCEPTANCE = {}


@pytest.fixture(scope="session")
def params():
    return derive_params()


@pytest.fixture(scope="session")
def default_cfg():
    return ExperimentConfig.from_dict()


@pytest.fixture(scope="session")
def default_data(default_cfg):
    return initial_data(default_cfg, default_cfg.grid())


@pytest.fixture(scope="session")
def long_cascade(default_cfg, default_data, params):
    """xi_{i;1}, xi_{i;2} to t = 800 at dx = 0.05 on the default checkpoints."""
    r = default_cfg.raw["run"]
    return solve_cascade(default_data.masses, params, default_data.grid, r["n_max"], r["t_end"],
                         default_cfg.checkpoints())


@pytest.fixture(scope="session")
def long_trajectory(default_cfg, default_data, params):
    """Nonlinear solve of the default experiment on the cascade's grid and checkpoints."""
    r = default_cfg.raw["run"]
    return solve_p_system(default_data, params, default_data.grid, r["t_end"], default_cfg.checkpoints())


@pytest.fixture(scope="session")
def cascade_result(long_cascade, params, default_cfg):
    v = default_cfg.raw["verify"]
    return cascade_claims(long_cascade, params, tuple(v["window"]), v["collapse_t"], v["oracle_points"])


@pytest.fixture(scope="session")
def xi_sum_run(default_cfg, default_data, params):
    """Three levels plus the summed pair Xi to t = 100."""
    return solve_cascade(default_data.masses, params, default_cfg.grid(XI_SUM_T), XI_SUM_DEPTH, XI_SUM_T,
                         geometric_checkpoints(XI_SUM_T), with_Xi=True)


@pytest.fixture(scope="session")
def green_run(default_cfg, params):
    g = default_cfg.raw["green"]
    grid = default_cfg.grid(g["t_end"])
    return numerical_green(params, g["sigma_cells"] * grid.dx, grid, g["t_end"],
                           geometric_checkpoints(g["t_end"]))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, line = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:>2}: {'PASS' if ok else 'FAIL'}  {line}")
