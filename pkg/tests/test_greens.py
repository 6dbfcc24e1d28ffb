import math

import numpy as np
import pytest

from diffwaves.analysis import fit_power_law
from diffwaves.greens import (
    diagonalise,
    gstar,
    gstar_ij,
    numerical_green,
    q_coefficients,
    refined_residual,
    singular_part,
    structure_residual,
)
from diffwaves.model import Grid1D


@pytest.fixture(scope="module")
def short_green(params):
    g = Grid1D.symmetric(80.0, 0.05)
    return {s: numerical_green(params, s * g.dx, g, 20.0, [5.0, 10.0, 20.0]) for s in (5, 10)}


def test_gstar_integrates_to_identity(params):
    x = np.linspace(-100, 100, 40001)
    G = gstar(x, 10.0, params)
    np.testing.assert_allclose(np.trapezoid(G, x, axis=0), np.eye(2), atol=1e-12)


def test_gstar_on_peak(params):
    t = 30.0
    G = gstar(params.c * t, t, params)
    assert G[0, 0] == pytest.approx(1 / (2 * math.sqrt(2 * math.pi * params.nu * t)), rel=1e-12)
    with pytest.raises(ValueError):
        gstar(0.0, 0.0, params)


def test_gstar_diagonalises(params):
    x = np.linspace(-40, 40, 81)
    D = diagonalise(gstar(x, 12.0, params, sigma=0.3), params)
    for i in (1, 2):
        for j in (1, 2):
            np.testing.assert_allclose(D[:, i - 1, j - 1], gstar_ij(i, j, x, 12.0, params, 0.3), atol=1e-15)


def test_q_coefficients(params):
    c, nu = params.c, params.nu
    _, q0 = q_coefficients(0, params)
    np.testing.assert_allclose(q0[0], [0.5, -0.5], atol=1e-15)
    np.testing.assert_allclose(q0[1], [-0.5, 0.5], atol=1e-15)
    Q1, _ = q_coefficients(1, params)
    assert Q1[1, 0] == pytest.approx(-c * c / nu, rel=1e-15)
    assert params.gamma_i(1) == -params.gamma_i(2)
    with pytest.raises(ValueError):
        q_coefficients(2, params)


def test_singular_part_negligible_late(params):
    x = np.linspace(-1, 1, 21)
    assert np.abs(singular_part(x, 40.0, params, 0.25)).max() < 1e-20


def test_mass_identity(short_green):
    for tr in short_green.values():
        np.testing.assert_allclose(tr.masses(), np.broadcast_to(np.eye(2), tr.masses().shape), atol=1e-12)


def test_mollifier_width_guard(params):
    g = Grid1D.symmetric(60.0, 0.1)
    with pytest.raises(ValueError):
        numerical_green(params, 2 * g.dx, g, 10.0, [10.0])


def test_mollifier_consistency(short_green):
    # the comparison is exact in sigma, so the residual must not depend on it
    r5, ref5 = structure_residual(short_green[5])
    r10, ref10 = structure_residual(short_green[10])
    np.testing.assert_allclose(r5 / ref5, r10 / ref10, rtol=0.05)
    np.testing.assert_allclose(refined_residual(1, short_green[5]), refined_residual(1, short_green[10]), rtol=0.1)


def test_gamma_correction_helps(short_green):
    tr = short_green[5]
    for i in (1, 2):
        assert np.all(refined_residual(i, tr) < 0.5 * refined_residual(i, tr, correct=False))


def test_structure_residual_decays(green_run):
    r, ref = structure_residual(green_run)
    fit = fit_power_law(green_run.times, r, (5.0, 100.0))
    ref_fit = fit_power_law(green_run.times, ref, (5.0, 100.0))
    # one half-power faster than the peak
    assert fit.exponent - ref_fit.exponent == pytest.approx(-0.5, abs=0.1)
