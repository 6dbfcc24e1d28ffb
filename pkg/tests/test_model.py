import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from diffwaves.model import (
    DomainTooSmallError,
    FlowState,
    Grid1D,
    PressureLaw,
    ScalarField,
    WaveMasses,
    alpha_beta,
    derive_params,
    from_characteristic,
    masses,
    psi,
    psi_tilde,
    Psi,
    Theta,
    to_characteristic,
    weights,
)


def grid(half=20.0, dx=0.05):
    return Grid1D.symmetric(half, dx)


# --- parameters -------------------------------------------------------------

def test_gamma_law_constants(params):
    # p(v) = v^-1.4: p'(1) = -1.4, p''(1) = 1.4 * 2.4
    assert params.c == pytest.approx(math.sqrt(1.4), rel=1e-15)
    assert params.c == pytest.approx(1.18322, abs=5e-6)
    assert params.p2 == pytest.approx(3.36, rel=1e-15)
    assert params.lam == (params.c, -params.c)


def test_gamma_corrections(params):
    assert params.gamma_i(1) == pytest.approx(-0.211288563682129144, rel=1e-14)
    assert params.gamma_i(2) == -params.gamma_i(1)


def test_eigenvectors_closed_form(params):
    c, p2 = params.c, params.p2
    np.testing.assert_allclose(params.l(1), p2 / (4 * c) * np.array([-1, 1 / c]), rtol=1e-15)
    np.testing.assert_allclose(params.r(2), 2 * c / p2 * np.array([1, c]), rtol=1e-15)


@given(st.floats(1.05, 4.0), st.floats(0.1, 5.0))
def test_biorthogonality(gamma, nu):
    p = derive_params(PressureLaw.gamma_law(gamma), nu)
    np.testing.assert_allclose(p.left @ p.right, np.eye(2), atol=1e-14)


def test_rejects_degenerate_laws():
    v = np.linspace(0.5, 2.0, 16)
    with pytest.raises(ValueError):
        PressureLaw.tabulated(v, 2.0 - v)  # linear: p''(1) = 0
    with pytest.raises(ValueError):
        PressureLaw.tabulated(v, v**2)  # increasing
    with pytest.raises(ValueError):
        PressureLaw.gamma_law(1.0)
    with pytest.raises(ValueError):
        derive_params(nu=0.0)


def test_tabulated_law_matches_gamma_law():
    v = np.linspace(0.5, 2.0, 400)
    tab = derive_params(PressureLaw.tabulated(v, v**-1.4))
    ref = derive_params()
    assert tab.c == pytest.approx(ref.c, rel=1e-6)
    assert tab.p2 == pytest.approx(ref.p2, rel=1e-4)


# --- grids and fields -----------------------------------------------------------

def test_symmetric_grid_has_origin_node():
    g = grid(10.0, 0.1)
    assert g.n % 2 == 1
    assert g.x[g.n // 2] == 0.0
    assert g.dx == pytest.approx(0.1, rel=1e-14)


def test_grid_minimum_size():
    with pytest.raises(ValueError):
        Grid1D(0.0, 1.0, 8)


def test_field_validation():
    g = grid()
    with pytest.raises(ValueError):
        ScalarField(g, np.zeros(g.n - 1))
    with pytest.raises(ValueError):
        ScalarField(g, np.full(g.n, np.nan))


def test_flowstate_guards():
    g = grid()
    z = ScalarField(g, np.zeros(g.n))
    with pytest.raises(ValueError):
        FlowState(ScalarField(g, np.full(g.n, -1.0)), z)
    with pytest.raises(DomainTooSmallError):
        FlowState(ScalarField(g, np.full(g.n, 1e-6)), z)


# --- characteristic variables -------------------------------------------------------

def test_steady_state_is_zero(params):
    g = grid()
    z = ScalarField(g, np.zeros(g.n))
    u1, u2 = to_characteristic(FlowState(z, z), params)
    assert not u1.values.any() and not u2.values.any()
    st_ = from_characteristic(u1, u2, params)
    assert not st_.dv.values.any() and not st_.u.values.any()


def test_velocity_only_state(params):
    g = grid()
    phi = 0.01 * np.exp(-g.x**2)
    u1, u2 = to_characteristic(FlowState(ScalarField(g, np.zeros(g.n)), ScalarField(g, phi)), params)
    k = params.p2 / (4 * params.c**2)
    np.testing.assert_allclose(u1.values, k * phi, rtol=1e-14, atol=0)
    np.testing.assert_allclose(u2.values, k * phi, rtol=1e-14, atol=0)


def test_opposite_waves_have_no_velocity(params):
    g = grid()
    phi = 0.01 * np.exp(-g.x**2)
    s = from_characteristic(ScalarField(g, phi), ScalarField(g, -phi), params)
    assert np.abs(s.u.values).max() <= 1e-15 * phi.max()
    np.testing.assert_allclose(s.dv.values, -(4 * params.c / params.p2) * phi, rtol=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.floats(-0.05, 0.05), st.floats(-0.05, 0.05), st.floats(0.5, 3.0), st.floats(-3, 3))
def test_round_trip(a, b, w, x0):
    p = derive_params()
    g = grid()
    dv = ScalarField(g, a * np.exp(-((g.x - x0) / w) ** 2))
    u = ScalarField(g, b * np.exp(-((g.x + x0) / w) ** 2))
    back = from_characteristic(*to_characteristic(FlowState(dv, u), p), p)
    np.testing.assert_allclose(back.dv.values, dv.values, atol=1e-15)
    np.testing.assert_allclose(back.u.values, u.values, atol=1e-15)


def test_from_characteristic_rejects_vacuum(params):
    g = grid()
    big = ScalarField(g, np.exp(-g.x**2) * 10)
    with pytest.raises(ValueError):
        from_characteristic(big, -big, params)


# --- masses --------------------------------------------------------------------

def test_masses_zero():
    g = grid()
    z = ScalarField(g, np.zeros(g.n))
    m = masses(z, z)
    assert (m.M1, m.M2, m.eps) == (0.0, 0.0, 0.0)


def test_masses_gaussian_oracle(params):
    g = grid()
    a = 0.01
    st_ = FlowState(ScalarField(g, np.zeros(g.n)), ScalarField(g, a * np.exp(-g.x**2)))
    m = masses(*to_characteristic(st_, params))
    expect = params.p2 / (4 * params.c**2) * a * math.sqrt(math.pi)
    assert m.M1 == pytest.approx(expect, rel=1e-13)
    assert m.M2 == pytest.approx(expect, rel=1e-13)


def test_masses_odd_field():
    g = grid()
    f = ScalarField(g, g.x * np.exp(-g.x**2))
    assert abs(masses(f, f).M1) < 1e-15


def test_masses_warns_on_truncation():
    g = grid()
    f = ScalarField(g, np.full(g.n, 1e-3))
    with pytest.warns(UserWarning):
        masses(f, f)


def test_eps_uses_absolute_values():
    assert WaveMasses(-0.03, 0.01).eps == 0.03


# --- exponent ladder and weights ------------------------------------------------------

@pytest.mark.parametrize("n, a, b", [(0, Fraction(3, 2), Fraction(1)),
                                     (1, Fraction(7, 4), Fraction(5, 4)),
                                     (-1, Fraction(1), Fraction(1, 2))])
def test_alpha_beta_values(n, a, b):
    assert alpha_beta(n) == (a, b)


def test_alpha_beta_ladder():
    prev = alpha_beta(-1)
    for n in range(0, 12):
        a, b = alpha_beta(n)
        assert a - b == Fraction(1, 2)
        assert prev[0] < a < 2 and prev[1] < b < Fraction(3, 2)
        prev = (a, b)
    with pytest.raises(ValueError):
        alpha_beta(-2)


def test_weights_on_characteristic():
    lam, t = 1.3, 24.0
    x = lam * (t + 1)
    assert psi(1, x, t, lam) == pytest.approx((t + 1) ** (-7 / 8), rel=1e-14)
    assert Theta(1.5, x, t, lam, 2.0) == pytest.approx((t + 1) ** (-0.75), rel=1e-14)


def test_psi_tilde_dominant_term():
    lam, t = 1.2, 1e4
    val = psi_tilde(1, 0.0, t, lam)
    assert val == pytest.approx(abs(lam * (t + 1)) ** (-7 / 4), rel=0.02)


@settings(max_examples=40)
@given(st.integers(0, 4), st.floats(0.0, 500.0), st.floats(-0.9, 0.9))
def test_weights_positive_and_peaked(n, t, lam):
    x = np.linspace(lam * (t + 1) - 50, lam * (t + 1) + 50, 2001)
    w = psi(n, x, t, lam)
    assert np.all(w > 0) and np.all(psi_tilde(n, x, t, lam) > 0)
    assert abs(x[np.argmax(w)] - lam * (t + 1)) <= 0.05 + 1e-9


def test_weights_dispatch(params):
    x = np.linspace(-5, 5, 11)
    np.testing.assert_array_equal(weights("Psi", 1, 1, x, 3.0, params), Psi(1, 1, x, 3.0, params))
    with pytest.raises(ValueError):
        weights("nope", 1)
    with pytest.raises(ValueError):
        Theta(1.0, 0.0, 1.0, 1.0, 0.0)
