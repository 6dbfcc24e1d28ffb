import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from diffwaves.analysis import (
    bound_claim,
    ddx4,
    evaluate_claim,
    expansion_terms,
    fit_power_law,
    lp_norm,
    lp_series,
    probe,
    profile_collapse,
    remainder,
    sample,
)
from diffwaves.cascade import solve_cascade
from diffwaves.model import Grid1D, ScalarField, WaveMasses
from diffwaves.pde import build_initial_data, solve_p_system
from diffwaves.waves import theta

T = np.geomspace(10, 1000, 30)


# --- fits -------------------------------------------------------------------------

def test_fit_exact_power():
    f = fit_power_law(T, 3.0 * (T + 1) ** -0.75, (10, 1000))
    assert f.exponent == pytest.approx(-0.75, abs=1e-12)
    assert f.intercept == pytest.approx(math.log(3.0), abs=1e-12)
    assert f.r_squared == pytest.approx(1.0)


def test_fit_noisy(rng):
    v = (T + 1) ** -1.5 * (1 + 0.01 * rng.standard_normal(T.size))
    assert fit_power_law(T, v, (10, 1000)).exponent == pytest.approx(-1.5, abs=0.02)


def test_fit_constant():
    f = fit_power_law(T, np.full(T.size, 2.0), (10, 1000))
    assert f.exponent == pytest.approx(0.0, abs=1e-14) and f.r_squared == 1.0


def test_fit_errors():
    with pytest.raises(ValueError):
        fit_power_law(T, T, (100, 10))
    with pytest.raises(ValueError):
        fit_power_law(T, T, (10, 12))
    with pytest.raises(ValueError):
        fit_power_law(T, -T, (10, 1000))


# --- norms and probes -----------------------------------------------------------

def test_lp_norms_of_gaussian():
    g = Grid1D.symmetric(30.0, 0.01)
    f = np.exp(-g.x**2)
    assert lp_norm(f, 1, g.dx) == pytest.approx(math.sqrt(math.pi), rel=1e-12)
    assert lp_norm(ScalarField(g, f), 2) == pytest.approx((math.pi / 2) ** 0.25, rel=1e-12)
    assert lp_norm(f, np.inf) == 1.0
    s = lp_series(np.stack([f, 2 * f]), g.dx)
    np.testing.assert_allclose(s["1"], [math.sqrt(math.pi), 2 * math.sqrt(math.pi)], rtol=1e-12)


def test_lp_norm_errors():
    with pytest.raises(ValueError):
        lp_norm(np.ones(5), 0.5, 1.0)
    with pytest.raises(ValueError):
        lp_norm(np.ones(5), 2)
    with pytest.raises(ValueError):
        lp_norm(np.array([1.0, np.nan]), np.inf)


@settings(max_examples=30)
@given(st.floats(0.3, 3.0), st.floats(-2, 2), st.floats(1.0, 4.0))
def test_holder(w, x0, p):
    # ||f g||_1 <= ||f||_p ||g||_q
    g = Grid1D.symmetric(20.0, 0.02)
    f = np.exp(-((g.x - x0) / w) ** 2)
    h = g.x * np.exp(-g.x**2)
    q = p / (p - 1) if p > 1 else np.inf
    assert lp_norm(f * h, 1, g.dx) <= lp_norm(f, p, g.dx) * lp_norm(h, q, g.dx) * (1 + 1e-12)


def test_probe_modes():
    g = Grid1D.symmetric(10.0, 0.5)
    times = np.array([1.0, 2.0])
    fields = np.stack([g.x, 2 * g.x])
    np.testing.assert_allclose(probe(times, fields, g, "fixed", 1.5), [1.5, 3.0])
    np.testing.assert_allclose(probe(times, fields, g, "fixed", 1.25), [1.25, 2.5])
    np.testing.assert_allclose(probe(times, fields, g, "characteristic", 0.5, lam=2.0), [2.5, 9.0])
    with pytest.raises(ValueError):
        probe(times, fields, g, "fixed", 11.0)
    with pytest.raises(ValueError):
        probe(times, fields, g, "characteristic")
    with pytest.raises(ValueError):
        probe(times, fields[:1], g)


def test_probe_theta_along_characteristic(params):
    # on the characteristic theta decays like (t+1)^(-1/2)
    M = WaveMasses(0.02, 0.0)
    g = Grid1D.symmetric(1300.0, 0.1)
    th = np.array([theta(1, M, params, g.x, t) for t in T])
    v = probe(T, th, g, "characteristic", params.c, lam=params.c)
    assert fit_power_law(T, v, (10, 1000)).exponent == pytest.approx(-0.5, abs=0.02)
    # at the origin it is exponentially small
    assert np.abs(probe(T[-10:], th[-10:], g)).max() < 1e-70


def test_sample_is_fourth_order_between_nodes():
    errs = []
    for dx in (0.1, 0.05):
        g = Grid1D.symmetric(5.0, dx)
        xs = [k * 0.4 + 0.37 * dx for k in (-5, 1, 4)]
        errs.append(max(abs(sample(np.sin(g.x), g, x) - np.sin(x)) for x in xs))
    assert errs[0] / errs[1] == pytest.approx(16.0, rel=0.2)
    with pytest.raises(ValueError):
        sample(np.sin(g.x), g, 6.0)


def test_ddx4_order():
    errs = []
    for dx in (0.1, 0.05):
        x = np.arange(-5, 5 + dx / 2, dx)
        errs.append(np.abs(ddx4(np.sin(x), dx) - np.cos(x))[3:-3].max())
    assert errs[0] / errs[1] == pytest.approx(16.0, rel=0.05)


# --- expansion terms and remainders ------------------------------------------------

def test_expansion_terms_zero_masses(params):
    h = solve_cascade(WaveMasses(0.0, 0.0), params, Grid1D.symmetric(40.0, 0.1), 2, 5.0)
    assert not expansion_terms(h, params, 1).any() and not expansion_terms(h, params, 2).any()
    with pytest.raises(ValueError):
        expansion_terms(h, params, 3)


def test_expansion_terms_zero_mass(long_cascade, params):
    u = expansion_terms(long_cascade, params, 1)
    assert np.abs(np.trapezoid(u, dx=long_cascade.grid.dx, axis=-1)).max() < 1e-12


def test_expansion_term_at_origin_is_xi(long_cascade, params):
    # the theta cross term is exponentially small away from the characteristics
    h = long_cascade
    j = h.grid.n // 2
    late = h.times >= 50
    u = expansion_terms(h, params, 1)
    np.testing.assert_allclose(u[late, :, j], h.xi[late, :, 0, j], rtol=0, atol=1e-12)
    # at level 2 the cross term is the opposite family's xi_{i';1} slope
    u2 = expansion_terms(h, params, 2)
    dx = h.grid.dx
    for i in (1, 2):
        ip = 3 - i
        slope = (h.xi[late, ip - 1, 0, j + 1] - h.xi[late, ip - 1, 0, j - 1]) / (2 * dx)
        np.testing.assert_allclose(u2[late, i - 1, j] - h.xi[late, i - 1, 1, j], params.gamma_i(ip) * slope,
                                   rtol=1e-3, atol=1e-16)


def test_remainder_zero_data(params):
    g = Grid1D.symmetric(40.0, 0.1)
    d = build_initial_data("gaussian", 0.0, 0.0, 1.0, g, params)
    tr = solve_p_system(d, params, g, 5.0)
    h = solve_cascade(d.masses, params, g, 1, 5.0)
    r = remainder(tr, h, params, 1)
    assert not r.v.any() and not r.normalized.any()
    assert set(r.norms) == {"1", "2", "inf"}


def test_remainder_mismatch(params):
    g = Grid1D.symmetric(40.0, 0.1)
    d = build_initial_data("gaussian", 0.0, 0.0, 1.0, g, params)
    tr = solve_p_system(d, params, g, 5.0)
    h = solve_cascade(d.masses, params, g, 1, 5.0, [5.0])
    with pytest.raises(ValueError):
        remainder(tr, h, params, 1)
    with pytest.raises(ValueError):
        remainder(tr, solve_cascade(d.masses, params, Grid1D.symmetric(40.0, 0.05), 1, 5.0), params, 1)
    r0 = remainder(tr, None, params, 0)
    assert r0.n == 0


# --- similarity collapse ---------------------------------------------------------

def test_collapse_zero_masses(params):
    h = solve_cascade(WaveMasses(0.0, 0.0), params, Grid1D.symmetric(90.0, 0.1), 1, 20.0)
    c = profile_collapse(h, params)
    assert c.A_limit == 0.0 and c.B_limit == 0.0
    with pytest.raises(ValueError):
        profile_collapse(h, params, t_min=100.0)


# --- claims -------------------------------------------------------------------------

def test_evaluate_claim():
    assert evaluate_claim("exponent", -0.8, -0.75, 0.08)
    assert not evaluate_claim("exponent", -0.9, -0.75, 0.08)
    assert evaluate_claim("le", 0.5, 0.5, 0.0)
    assert not evaluate_claim("lt", 0.5, 0.5, 0.0)
    assert not evaluate_claim("le", float("nan"), 1.0, 0.0)
    with pytest.raises(ValueError):
        evaluate_claim("ge", 1.0, 1.0, 0.0)
    c = bound_claim("x", "anchor", 0.2, 0.1)
    assert not c.passed and c.to_dict()["kind"] == "le"
