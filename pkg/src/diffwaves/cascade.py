"""Higher-order diffusion waves and their quadrature oracles.

The hierarchy ``xi_{i;n}`` (n >= 1) solves

    d_t xi_{i;n} + lam_i d_x xi_{i;n} + d_x(theta_i xi_{i;n}) + d_x(theta_i' xi_{i';n-1})
        = (nu / 2) d_xx xi_{i;n},        xi_{i;n}(x, 0) = 0,

with ``xi_{i;0} = theta_i / 2``, so the level-1 forcing is ``d_x(theta_i'^2 / 2)``.
Summing over n gives the coupled pair ``Xi_1, Xi_2`` with forcing
``d_x(theta_i'^2 / 2 + theta_1 Xi_1 + theta_2 Xi_2)``.

Both are marched with the same IMEX trapezoidal scheme: Crank-Nicolson on the
viscous term, Heun on the conservative central-difference fluxes.  The
diffusion waves enter as exact coefficients at every stage time.
"""

from __future__ import annotations

import math
import warnings
from fractions import Fraction
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from . import kernels
from .model import (
    BOUNDARY_THRESHOLD,
    DomainTooSmallError,
    Grid1D,
    ModelParams,
    ScalarField,
    WaveMasses,
    boundary_excess,
)
from .waves import MASS_CAP, cole_hopf_phi, theta, theta_derivatives

DEFAULT_CFL = 0.8
DEFAULT_MARGIN = 12.0


class QuadratureWarning(UserWarning):
    pass


def geometric_checkpoints(t_end: float, t0: float = 1.0, ratio: float = 2 ** 0.25) -> list[float]:
    """``t0 * ratio**k`` up to ``t_end``; ``t_end`` itself is always included."""
    ts = []
    k = 0
    # snap log2(ratio) to a small fraction so that ratio = 2**(1/m) lands exactly on powers of two
    e = float(Fraction(math.log2(ratio)).limit_denominator(64))
    if abs(e - math.log2(ratio)) > 1e-12:
        e = math.log2(ratio)
    while True:
        t = t0 * 2.0 ** (k * e)
        if t > t_end * (1 + 1e-12):
            break
        ts.append(float(t))
        k += 1
    if not ts or abs(ts[-1] - t_end) > 1e-9 * max(1.0, t_end):
        ts.append(float(t_end))
    return ts


def check_domain(grid: Grid1D, c: float, t_end: float, margin: float = DEFAULT_MARGIN):
    need = c * (t_end + 1) + margin * math.sqrt(t_end + 1)
    if grid.x_min > -need * (1 - 1e-9) or grid.x_max < need * (1 - 1e-9):
        raise DomainTooSmallError(
            f"grid [{grid.x_min:g}, {grid.x_max:g}] does not cover +-{need:.1f} up to t = {t_end:g}"
        )


class ThetaMarcher:
    """IMEX trapezoidal march of fields transported with ``theta`` coefficients.

    Field ``f`` carries the conservative flux
    ``lam[f] q_f + sum_k theta_{fam[f,k]} q_{fld[f,k]} + theta_{src[f]}^2 / 2``
    and diffuses with coefficient ``nu / 2``.
    """

    def __init__(self, grid: Grid1D, params: ModelParams, masses: WaveMasses,
                 lam, cpl_fam, cpl_field, src_fam, dt: float, backend=None):
        self.k = kernels if backend is None else kernels.load(backend)
        self.backend = kernels.BACKEND if backend is None else backend
        self.grid, self.params, self.masses = grid, params, masses
        self.x = grid.x
        self.dx = grid.dx
        self.lam = np.ascontiguousarray(lam, dtype=float)
        self.cpl_fam = np.ascontiguousarray(cpl_fam, dtype=np.int_)
        self.cpl_field = np.ascontiguousarray(cpl_field, dtype=np.int_)
        self.src_fam = np.ascontiguousarray(src_fam, dtype=np.int_)
        self.nf = len(self.lam)
        self.dt = dt
        self._fac = {}
        E = [np.expm1(masses[i] / params.nu) for i in (1, 2)]
        for Ei in E:
            if abs(math.log1p(Ei)) > MASS_CAP:
                raise ValueError("masses exceed the small-amplitude cap")
        self._E = E

    def theta(self, t: float, out=None) -> np.ndarray:
        nu = self.params.nu
        out = np.empty((2, self.grid.n)) if out is None else out
        T = t + 1.0
        K = 1.0 / math.sqrt(2 * nu * T)
        for i in (1, 2):
            E = self._E[i - 1]
            self.k.theta_profile(self.x, self.params.lam_i(i) * T, K, E,
                                 nu * K * E / math.sqrt(math.pi), out[i - 1])
        return out

    def _factors(self, h: float):
        fac = self._fac.get(h)
        if fac is None:
            a = 0.5 * h * 0.5 * self.params.nu / self.dx**2
            n = self.grid.n
            lower = np.full(n, -a)
            upper = np.full(n, -a)
            diag = np.full(n, 1 + 2 * a)
            # Dirichlet rows
            diag[0] = diag[-1] = 1.0
            upper[0] = lower[-1] = 0.0
            lower[0] = upper[-1] = 0.0
            fac = self.k.tridiag_factor(lower, diag, upper)
            if len(self._fac) > 8:
                self._fac.clear()
            self._fac[h] = fac
        return fac

    def explicit(self, q, th, out):
        self.k.conservative_rhs(q, th, self.lam, self.cpl_fam, self.cpl_field,
                                self.src_fam, 0.5 / self.dx, out)
        return out

    def step(self, q, th0, th1, h):
        """One IMEX trapezoidal step of length ``h`` from ``q`` (theta at both ends given)."""
        fac = self._factors(h)
        base = q.copy()
        self.k.add_laplacian(q, 0.5 * h * 0.5 * self.params.nu / self.dx**2, base)
        e0 = self.explicit(q, th0, np.empty_like(q))
        st = base + h * e0
        self.k.tridiag_solve_factored(fac, st)
        e1 = self.explicit(st, th1, np.empty_like(q))
        new = base + 0.5 * h * (e0 + e1)
        self.k.tridiag_solve_factored(fac, new)
        return new

    def run(self, t_end: float, checkpoints, guard: float = BOUNDARY_THRESHOLD,
            q0=None, on_checkpoint=None):
        """March to ``t_end``; returns ``(times, stack)`` with one ``(nf, n)`` slab per checkpoint.

        Checkpoints off the uniform step lattice are reached by one extra
        partial step from the preceding lattice state.
        """
        n = self.grid.n
        q = np.zeros((self.nf, n)) if q0 is None else np.array(q0, dtype=float)
        ck = sorted(float(t) for t in checkpoints)
        if ck and (ck[0] < 0 or ck[-1] > t_end * (1 + 1e-12)):
            raise ValueError("checkpoints must lie in [0, t_end]")
        nsteps = max(1, math.ceil(t_end / self.dt - 1e-9))
        dt = t_end / nsteps
        times, out = [], []

        def record(tc, qc):
            b = boundary_excess(qc.ravel() if qc.ndim == 1 else np.abs(qc).max(axis=0))
            if b > guard:
                raise DomainTooSmallError(f"boundary value {b:.3e} exceeds {guard:.1e} at t = {tc:g}")
            times.append(tc)
            out.append(qc.copy())
            if on_checkpoint is not None:
                on_checkpoint(tc, qc)

        t = 0.0
        th0 = self.theta(0.0)
        while ck and ck[0] <= 1e-12:
            record(ck.pop(0), q)
        for s in range(nsteps):
            t1 = t_end if s == nsteps - 1 else (s + 1) * dt
            while ck and ck[0] < t1 - 1e-9 * max(1.0, t1):
                tc = ck.pop(0)
                record(tc, self.step(q, th0, self.theta(tc), tc - t) if tc - t > 1e-12 else q)
            th1 = self.theta(t1)
            q = self.step(q, th0, th1, dt)
            th0, t = th1, t1
            while ck and ck[0] <= t1 + 1e-9 * max(1.0, t1):
                record(ck.pop(0), q)
        return np.array(times), np.array(out)


def _time_step(grid: Grid1D, params: ModelParams, masses: WaveMasses, cfl: float) -> float:
    # theta shifts the local transport speed by at most max|theta|
    tmax = masses.eps / math.sqrt(2 * math.pi * params.nu) * 2 + 1e-300
    if cfl <= 0 or cfl * (1 + tmax / params.c) > 1.0:
        raise ValueError(f"CFL number {cfl} violates the explicit transport limit")
    return cfl * grid.dx / params.c


@dataclass
class WaveHierarchy:
    """Checkpointed ``xi_{i;n}`` (and optionally ``Xi_i``) fields.

    ``xi[k, i-1, n-1]`` is ``xi_{i;n}`` at ``times[k]``; ``Xi[k, i-1]`` likewise.
    """

    grid: Grid1D
    params: ModelParams
    masses: WaveMasses
    n_max: int
    times: np.ndarray
    xi: np.ndarray | None = None
    Xi: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def index(self, t: float) -> int:
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > 1e-9 * max(1.0, t):
            raise KeyError(f"no checkpoint at t = {t}")
        return k

    def xi_field(self, i: int, n: int, t: float) -> ScalarField:
        if n == 0:
            return self.theta_field(i, t) * 0.5
        if not 1 <= n <= self.n_max:
            raise ValueError(f"hierarchy depth is {self.n_max}")
        return ScalarField(self.grid, self.xi[self.index(t), i - 1, n - 1], float(t))

    def Xi_field(self, i: int, t: float) -> ScalarField:
        if self.Xi is None:
            raise ValueError("Xi was not computed")
        return ScalarField(self.grid, self.Xi[self.index(t), i - 1], float(t))

    def theta_field(self, i: int, t: float) -> ScalarField:
        return ScalarField(self.grid, theta(i, self.masses, self.params, self.grid.x, t), float(t))

    def mass(self, i: int, n: int) -> np.ndarray:
        """Trapezoidal mass of ``xi_{i;n}`` at every checkpoint."""
        return np.trapezoid(self.xi[:, i - 1, n - 1], dx=self.grid.dx, axis=-1)


def _layout(n_max: int, with_Xi: bool):
    lam, fam, fld, src = [], [], [], []
    for i in (1, 2):
        ip = 3 - i
        for n in range(1, n_max + 1):
            f = (i - 1) * n_max + (n - 1)
            lam.append(1.0 if i == 1 else -1.0)
            if n == 1:
                fam.append([i, 0])
                fld.append([f, 0])
                src.append(ip)
            else:
                fam.append([i, ip])
                fld.append([f, (ip - 1) * n_max + (n - 2)])
                src.append(0)
    if with_Xi:
        base = 2 * n_max
        for i in (1, 2):
            lam.append(1.0 if i == 1 else -1.0)
            fam.append([1, 2])
            fld.append([base, base + 1])
            src.append(3 - i)
    return np.array(lam), np.array(fam), np.array(fld), np.array(src)


def solve_cascade(masses: WaveMasses, params: ModelParams, grid: Grid1D, n_max: int,
                  t_end: float, checkpoints=None, *, with_Xi: bool = False,
                  cfl: float = DEFAULT_CFL, margin: float = DEFAULT_MARGIN,
                  guard: float = BOUNDARY_THRESHOLD, backend=None) -> WaveHierarchy:
    """March ``xi_{i;n}`` for both families and ``n = 1..n_max`` simultaneously.

    With ``with_Xi`` the coupled ``Xi`` pair is marched alongside, sharing the
    diffusion-wave evaluations.
    """
    if n_max < 0 or (n_max == 0 and not with_Xi):
        raise ValueError("nothing to march")
    check_domain(grid, params.c, t_end, margin)
    dt = _time_step(grid, params, masses, cfl)
    lam, fam, fld, src = _layout(n_max, with_Xi)
    m = ThetaMarcher(grid, params, masses, lam * params.c, fam, fld, src, dt, backend=backend)
    if checkpoints is None:
        checkpoints = geometric_checkpoints(t_end)
    times, stack = m.run(t_end, checkpoints, guard=guard)
    nx = 2 * n_max
    xi = stack[:, :nx].reshape(len(times), 2, n_max, grid.n) if n_max else None
    Xi = stack[:, nx:].reshape(len(times), 2, grid.n) if with_Xi else None
    return WaveHierarchy(grid, params, masses, n_max, times, xi, Xi,
                         meta={"dt": m.dt, "cfl": cfl, "margin": margin, "backend": m.backend})


def solve_Xi(masses: WaveMasses, params: ModelParams, grid: Grid1D, t_end: float,
             checkpoints=None, **kw) -> WaveHierarchy:
    """The summed pair ``(Xi_1, Xi_2)`` on its own."""
    return solve_cascade(masses, params, grid, 0, t_end, checkpoints, with_Xi=True, **kw)


# --- quadrature oracles -----------------------------------------------------

def heat_kernel(xi, tau, lam: float, nu: float):
    """Advected heat kernel of ``d_t + lam d_x - (nu/2) d_xx``: variance ``nu tau``."""
    return np.exp(-((xi - lam * tau) ** 2) / (2 * nu * tau)) / np.sqrt(2 * np.pi * nu * tau)


_WIDTH = 14.0


def heat_convolution(f, lam: float, nu: float, x: float, tau: float, s: float = 0.0,
                     support=None, nodes: int = 801) -> float:
    """``int G_lam(x - y, tau) f(y, s) dy`` by the trapezoidal rule on the kernel window.

    ``support(s) -> (lo, hi)`` optionally restricts the window to where ``f``
    is not negligible.
    """
    if tau <= 0:
        return float(f(np.array([x]), s)[0])
    c0 = x - lam * tau
    half = _WIDTH * math.sqrt(nu * tau)
    lo, hi = c0 - half, c0 + half
    if support is not None:
        slo, shi = support(s)
        lo, hi = max(lo, slo), min(hi, shi)
        if hi <= lo:
            return 0.0
    y = np.linspace(lo, hi, nodes)
    vals = heat_kernel(x - y, tau, lam, nu) * f(y, s)
    return float(np.trapezoid(vals, y))


def duhamel_oracle(source, lam: float, nu: float, x: float, t: float, support=None,
                   rtol: float = 1e-10, atol: float = 1e-16, t_lo: float = 0.0) -> float:
    """``int_{t_lo}^t int G_lam(x - y, t - s) source(y, s) dy ds`` by nested quadrature.

    ``source(y, s)`` must be vectorised in ``y``.  A warning reports the
    achieved tolerance when the outer adaptive rule does not converge.
    """
    if t <= t_lo:
        return 0.0
    inner = lambda s: heat_convolution(source, lam, nu, x, t - s, s, support)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(inner, t_lo, t, epsabs=atol, epsrel=rtol, limit=400)
    if err > max(atol, rtol * abs(val)) * 100:
        warnings.warn(f"Duhamel quadrature reached only {err:.2e}", QuadratureWarning)
    return float(val)


def _family_support(params: ModelParams, i: int, width: float = _WIDTH):
    lam = params.lam_i(i)
    nu = params.nu

    def support(s):
        T = s + 1.0
        h = width * math.sqrt(nu * T)
        return lam * T - h, lam * T + h

    return support


def xi1_oracle(i: int, masses: WaveMasses, params: ModelParams, x: float, t: float,
               rtol: float = 1e-10) -> float:
    """``xi_{i;1}(x, t)`` from closed-form data only.

    Writing ``theta_i = -nu phi_x / phi`` (``phi`` an advected heat solution) and
    ``xi_{i;1} = -nu d_x(w / phi)`` turns the linearised Burgers operator into the
    plain heat operator: ``w_t + lam_i w_x - (nu/2) w_xx = phi theta_i'^2 / (2 nu)``
    with ``w(., 0) = 0``.  Both ``w`` and ``w_x`` are Duhamel integrals of
    closed-form sources, and ``xi = -(nu w_x + theta_i w) / phi``.
    """
    nu = params.nu
    ip = 3 - i
    lam = params.lam_i(i)
    sup = _family_support(params, ip)

    def src(y, s):
        ph, _ = cole_hopf_phi(i, masses, params, y, s)
        th = theta(ip, masses, params, y, s)
        return ph * th * th / (2 * nu)

    def src_y(y, s):
        ph, ph_y = cole_hopf_phi(i, masses, params, y, s)
        th, th_y, _, _ = theta_derivatives(ip, masses, params, y, s)
        return (ph_y * th * th + 2 * ph * th * th_y) / (2 * nu)

    if masses[ip] == 0:
        return 0.0
    w = duhamel_oracle(src, lam, nu, x, t, sup, rtol=rtol)
    w_x = duhamel_oracle(src_y, lam, nu, x, t, sup, rtol=rtol)
    ph, _ = cole_hopf_phi(i, masses, params, x, t)
    th = theta(i, masses, params, x, t)
    return float(-(nu * w_x + th * w) / ph)


@dataclass(frozen=True)
class TestFunction:
    """Smooth ``f(y, s)`` with ``f_y`` and ``L f = f_s + lam' f_y - (nu/2) f_yy`` supplied."""

    __test__ = False  # not a pytest class

    f: object
    f_y: object
    L: object
    support: object = None


def moving_gaussian(alpha: float, lam_p: float, mu: float, nu: float) -> TestFunction:
    """``Theta_alpha(y, s; lam', mu)`` with its derivative and ``L_{lam'}`` image in closed form."""

    def f(y, s):
        T = s + 1.0
        return T ** (-alpha / 2) * np.exp(-((y - lam_p * T) ** 2) / (mu * T))

    def f_y(y, s):
        T = s + 1.0
        return f(y, s) * (-2 * (y - lam_p * T) / (mu * T))

    def L(y, s):
        T = s + 1.0
        X2 = (y - lam_p * T) ** 2
        return f(y, s) * (-alpha / (2 * T) + nu / (mu * T) + X2 / (mu * T * T) * (1 - 2 * nu / mu))

    def support(s):
        T = s + 1.0
        h = _WIDTH * math.sqrt(mu * T / 2)
        return lam_p * T - h, lam_p * T + h

    return TestFunction(f, f_y, L, support)


def heat_decomposition_check(fun: TestFunction, lam: float, lam_p: float, nu: float,
                             x: float, t: float, rtol: float = 1e-11) -> dict:
    """Both sides of the exact split of ``I = int_0^t int K_lam(x-y, t-s) f_y(y, s) dy ds``.

    ``K_lam = sqrt(2 pi nu) G_lam``; the right side is
    ``(lam - lam')^-1 sqrt(2 pi nu) f(x, t) + I_1 + I_2`` with ``I_1`` the same
    integral over ``s < sqrt(t)`` and ``I_2`` the boundary and ``L_{lam'} f``
    terms over ``s > sqrt(t)``.  Returns the pieces and ``residual = |LHS - RHS|``.
    """
    if lam == lam_p:
        raise ValueError("the split needs lam != lam'")
    if t < 1:
        raise ValueError("the split is stated for t >= 1")
    k = math.sqrt(2 * math.pi * nu)
    inv = 1.0 / (lam - lam_p)
    rt = math.sqrt(t)
    sup = fun.support
    lhs = k * duhamel_oracle(fun.f_y, lam, nu, x, t, sup, rtol=rtol)
    I1 = k * _duhamel_window(fun.f_y, lam, nu, x, t, 0.0, rt, sup, rtol)
    I21 = -inv * k * heat_convolution(fun.f, lam, nu, x, t - rt, rt, sup)
    I22 = -inv * k * _duhamel_window(fun.L, lam, nu, x, t, rt, t, sup, rtol)
    lead = inv * k * float(fun.f(np.array([x]), t)[0])
    rhs = lead + I1 + I21 + I22
    return {"lhs": lhs, "lead": lead, "I1": I1, "I21": I21, "I22": I22, "rhs": rhs,
            "residual": abs(lhs - rhs)}


def _duhamel_window(source, lam, nu, x, t, s_lo, s_hi, support, rtol):
    """``int_{s_lo}^{s_hi} int G_lam(x - y, t - s) source(y, s) dy ds``."""
    inner = lambda s: heat_convolution(source, lam, nu, x, t - s, s, support)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(inner, s_lo, s_hi, epsabs=1e-16, epsrel=rtol, limit=400)
    if err > max(1e-14, rtol * abs(val)) * 100:
        warnings.warn(f"Duhamel quadrature reached only {err:.2e}", QuadratureWarning)
    return float(val)
