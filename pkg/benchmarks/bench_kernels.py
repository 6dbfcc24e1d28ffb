"""Compare the compiled and numpy kernel backends.

Times each hot kernel on a production-sized grid, checks that both backends
agree, then times whole marcher steps (cascade and p-system).

    python3 benchmarks/bench_kernels.py [--n 51497] [--repeat 20]
"""

import argparse
import timeit

import numpy as np

from diffwaves import kernels
from diffwaves.cascade import ThetaMarcher, _layout
from diffwaves.model import Grid1D, WaveMasses, derive_params
from diffwaves.pde import PSystemMarcher


def kernel_cases(k, n):
    x = np.linspace(-1300, 1300, n)
    dx = x[1] - x[0]
    rng = np.random.default_rng(0)
    q = np.ascontiguousarray(rng.standard_normal((4, n)) * 1e-3)
    th = np.ascontiguousarray(rng.standard_normal((2, n)) * 1e-2)
    lam, fam, fld, src = _layout(2, False)
    lam = lam * 1.18
    out = np.empty_like(q)
    lower = np.full(n, -0.3)
    upper = np.full(n, -0.3)
    diag = np.full(n, 1.6)
    diag[0] = diag[-1] = 1.0
    upper[0] = lower[-1] = lower[0] = upper[-1] = 0.0
    fac = k.tridiag_factor(lower, diag, upper)
    dv = rng.standard_normal(n) * 1e-2
    face = np.empty(n - 1)
    o1 = np.empty(n)
    prof = np.empty(n)
    return {
        "theta_profile": lambda: k.theta_profile(x, 10.0, 0.3, 0.02, 0.01, prof),
        "conservative_rhs": lambda: k.conservative_rhs(q, th, lam, fam, fld, src, 0.5 / dx, out),
        "add_laplacian": lambda: k.add_laplacian(q, 0.2, out),
        "tridiag_solve": lambda: k.tridiag_solve_factored(fac, q.copy()),
        "viscous_faces": lambda: k.viscous_faces(dv, face),
        "viscous_apply": lambda: k.viscous_apply(dv, np.ones(n - 1), 0.2, o1),
        "central_diff": lambda: k.central_diff(dv, 0.5 / dx, o1),
    }


def agreement(n):
    """Max abs difference of every kernel output between backends."""
    res = {}
    outs = {}
    for name in ("cython", "python"):
        k = kernels.load(name)
        x = np.linspace(-50, 50, n)
        prof = np.empty(n)
        k.theta_profile(x, 10.0, 0.3, 0.02, 0.01, prof)
        rng = np.random.default_rng(1)
        q = np.ascontiguousarray(rng.standard_normal((4, n)))
        th = np.ascontiguousarray(rng.standard_normal((2, n)))
        lam, fam, fld, src = _layout(2, False)
        rhs = np.empty_like(q)
        k.conservative_rhs(q, th, lam, fam, fld, src, 10.0, rhs)
        lower = np.full(n, -0.3)
        upper = np.full(n, -0.3)
        diag = np.full(n, 1.6)
        sol = q.copy()
        k.tridiag_solve_factored(k.tridiag_factor(lower, diag, upper), sol)
        outs[name] = (prof, rhs, sol)
    for lbl, a, b in zip(("theta_profile", "conservative_rhs", "tridiag_solve"), outs["cython"], outs["python"]):
        res[lbl] = float(np.abs(a - b).max())
    return res


def bench(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def marcher_steps(backend, n_steps=20):
    p = derive_params()
    grid = Grid1D.symmetric(1287.0, 0.05)
    M = WaveMasses(-0.01, 0.01)
    lam, fam, fld, src = _layout(2, False)
    m = ThetaMarcher(grid, p, M, lam * p.c, fam, fld, src, 0.8 * grid.dx / p.c, backend=backend)
    q = np.zeros((4, grid.n))
    th0, th1 = m.theta(1.0), m.theta(1.0 + m.dt)

    def casc():
        m.step(q, th0, th1, m.dt)

    ps = PSystemMarcher(grid, p, 0.8 * grid.dx / p.c, backend=backend)
    w = 0.01 * np.exp(-grid.x**2)
    u = np.zeros_like(w)

    def psys():
        ps.step(w, u, ps.dt)

    return bench(casc, n_steps), bench(psys, n_steps)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=51497)
    ap.add_argument("--repeat", type=int, default=20)
    a = ap.parse_args()
    try:
        kernels.load("cython")
    except ImportError:
        raise SystemExit("compiled extension not built; run pip install -e . --no-build-isolation")
    print(f"agreement (n=2001): {agreement(2001)}")
    print(f"{'kernel':<20}{'cython ms':>12}{'python ms':>12}{'speedup':>10}")
    kc = kernel_cases(kernels.load("cython"), a.n)
    kp = kernel_cases(kernels.load("python"), a.n)
    for name in kc:
        tc = bench(kc[name], a.repeat) * 1e3
        tp = bench(kp[name], a.repeat) * 1e3
        print(f"{name:<20}{tc:>12.3f}{tp:>12.3f}{tp / tc:>10.1f}")
    cc, pc = marcher_steps("cython")
    cp, pp = marcher_steps("python")
    print(f"{'cascade step':<20}{cc * 1e3:>12.3f}{cp * 1e3:>12.3f}{cp / cc:>10.1f}")
    print(f"{'p-system step':<20}{pc * 1e3:>12.3f}{pp * 1e3:>12.3f}{pp / pc:>10.1f}")


if __name__ == "__main__":
    main()
