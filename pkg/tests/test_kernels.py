import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from diffwaves import kernels
from diffwaves.cascade import ThetaMarcher, _layout
from diffwaves.model import Grid1D, WaveMasses, derive_params

try:
    kernels.load("cython")
    HAVE_EXT = True
except ImportError:
    HAVE_EXT = False

needs_ext = pytest.mark.skipif(not HAVE_EXT, reason="compiled extension not built")
PY = kernels.load("python")


def test_backend_value():
    assert kernels.BACKEND in ("cython", "python")
    if HAVE_EXT and os.environ.get("DIFFWAVES_PURE_PYTHON") != "1":
        assert kernels.BACKEND == "cython"


def test_env_forces_fallback():
    env = dict(os.environ, DIFFWAVES_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from diffwaves import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.load("fortran")


def _system(n, a):
    lower = np.full(n, -a)
    upper = np.full(n, -a)
    diag = np.full(n, 1 + 2 * a)
    diag[0] = diag[-1] = 1.0
    upper[0] = lower[-1] = lower[0] = upper[-1] = 0.0
    return lower, diag, upper


def test_tridiag_solves_system():
    n, a = 50, 0.7
    lower, diag, upper = _system(n, a)
    Amat = np.diag(diag) + np.diag(upper[:-1], 1) + np.diag(lower[1:], -1)
    rhs = np.random.default_rng(3).standard_normal((3, n))
    want = np.linalg.solve(Amat, rhs.T).T
    for k in [PY] + ([kernels.load("cython")] if HAVE_EXT else []):
        got = rhs.copy()
        k.tridiag_solve_factored(k.tridiag_factor(lower, diag, upper), got)
        np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-14)


def test_flush_tiny_values():
    n = 40
    lower, diag, upper = _system(n, 0.0)
    rhs = np.full((1, n), 1e-200)
    rhs[0, 5] = 1.0
    PY.tridiag_solve_factored(PY.tridiag_factor(lower, diag, upper), rhs)
    assert rhs[0, 5] == 1.0 and np.count_nonzero(rhs) == 1
    out = np.empty(101)
    PY.theta_profile(np.linspace(-100, 100, 101), 0.0, 1.0, 0.01, 1.0, out)
    assert out[0] == 0.0 and out[50] > 0


@needs_ext
@settings(max_examples=25, deadline=None)
@given(st.integers(12, 300), st.floats(-0.3, 0.3), st.floats(0.05, 2.0), st.floats(-20, 20),
       st.integers(0, 2**31))
def test_backends_agree(n, E, K, shift, seed):
    cy = kernels.load("cython")
    rng = np.random.default_rng(seed)
    x = np.linspace(-30, 30, n)
    a, b = np.empty(n), np.empty(n)
    cy.theta_profile(x, shift, K, E, 0.7, a)
    PY.theta_profile(x, shift, K, E, 0.7, b)
    np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-300)

    lam, fam, fld, src = _layout(2, True)
    q = rng.standard_normal((len(lam), n))
    th = rng.standard_normal((2, n))
    r1, r2 = np.empty_like(q), np.empty_like(q)
    cy.conservative_rhs(q, th, lam, fam, fld, src, 3.0, r1)
    PY.conservative_rhs(q, th, lam, fam, fld, src, 3.0, r2)
    np.testing.assert_allclose(r1, r2, rtol=1e-13, atol=1e-13)
    cy.add_laplacian(q, 0.3, r1)
    PY.add_laplacian(q, 0.3, r2)
    np.testing.assert_allclose(r1, r2, rtol=1e-13, atol=1e-13)

    lower, diag, upper = _system(n, K)
    s1, s2 = q.copy(), q.copy()
    cy.tridiag_solve_factored(cy.tridiag_factor(lower, diag, upper), s1)
    PY.tridiag_solve_factored(PY.tridiag_factor(lower, diag, upper), s2)
    np.testing.assert_allclose(s1, s2, rtol=1e-12, atol=1e-13)

    dv = rng.uniform(-0.2, 0.2, n)
    f1, f2 = np.empty(n - 1), np.empty(n - 1)
    cy.viscous_faces(dv, f1)
    PY.viscous_faces(dv, f2)
    np.testing.assert_allclose(f1, f2, rtol=1e-15)
    o1, o2 = np.empty(n), np.empty(n)
    cy.viscous_apply(dv, f1, 0.4, o1)
    PY.viscous_apply(dv, f2, 0.4, o2)
    np.testing.assert_allclose(o1, o2, rtol=1e-13, atol=1e-15)
    cy.central_diff(dv, 2.0, o1)
    PY.central_diff(dv, 2.0, o2)
    np.testing.assert_allclose(o1, o2, rtol=1e-14, atol=1e-16)


@needs_ext
def test_marchers_agree():
    p = derive_params()
    grid = Grid1D.symmetric(60.0, 0.1)
    M = WaveMasses(0.02, 0.02)
    lam, fam, fld, src = _layout(2, False)
    res = []
    for be in ("cython", "python"):
        m = ThetaMarcher(grid, p, M, lam * p.c, fam, fld, src, 0.8 * grid.dx / p.c, backend=be)
        q = np.zeros((4, grid.n))
        t = 0.0
        for _ in range(50):
            q = m.step(q, m.theta(t), m.theta(t + m.dt), m.dt)
            t += m.dt
        res.append(q)
    assert np.abs(res[0]).max() > 0
    np.testing.assert_allclose(res[0], res[1], rtol=1e-11, atol=1e-18)
