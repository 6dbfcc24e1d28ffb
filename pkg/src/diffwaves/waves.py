"""Diffusion waves, similarity profiles and amplitude constants.

The diffusion wave of family ``i`` is the Cole-Hopf solution of

    theta_t + lam_i theta_x + (theta^2 / 2)_x = (nu / 2) theta_xx

started from ``M_i delta(x)`` at ``t = -1``.  With
``z = (x - lam_i (t + 1)) / sqrt(2 nu (t + 1))`` and ``E = expm1(M_i / nu)`` it
reads ``theta = -nu phi_x / phi`` where ``phi = 1 + E erfc(z) / 2`` solves the
advected heat equation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import erfc, erfcx

from .model import ModelParams, WaveMasses, alpha_beta

#: |M_i| / nu above this is rejected (keeps the Cole-Hopf denominator away from zero)
MASS_CAP = 0.5

_SQRT_PI = np.sqrt(np.pi)


def _check_mass(M: float, nu: float) -> float:
    if abs(M) / nu > MASS_CAP:
        raise ValueError(f"|M|/nu = {abs(M) / nu:.3g} exceeds the cap {MASS_CAP}")
    return np.expm1(M / nu)


def _gauss_over_phi(E: float, z):
    """``exp(-z^2) / (1 + E erfc(z) / 2)`` without under/overflow."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z > 0
    zp = z[pos]
    with np.errstate(over="ignore"):
        out[pos] = 1.0 / (np.exp(zp * zp) + 0.5 * E * erfcx(zp))
    zn = z[~pos]
    out[~pos] = np.exp(-zn * zn) / (1.0 + 0.5 * E * erfc(zn))
    return out


def theta(i: int, masses: WaveMasses, params: ModelParams, x, t):
    """Diffusion wave ``theta_i(x, t)``; vectorised over ``x`` (and ``t``)."""
    if np.any(np.asarray(t) <= -1):
        raise ValueError("theta is defined for t > -1")
    nu = params.nu
    E = _check_mass(masses[i], nu)
    x, t = np.broadcast_arrays(np.asarray(x, float), np.asarray(t, float))
    if E == 0:
        return np.zeros(x.shape)
    T = t + 1.0
    K = 1.0 / np.sqrt(2 * nu * T)
    z = (x - params.lam_i(i) * T) * K
    return nu * K * E / _SQRT_PI * _gauss_over_phi(E, z)


def theta_derivatives(i: int, masses: WaveMasses, params: ModelParams, x, t):
    """``(theta, theta_x, theta_xx, theta_t)`` by differentiating the closed form.

    With ``K = 1/sqrt(2 nu (t+1))`` one has ``log theta = log K - z^2 - log phi + const``
    and ``phi_x / phi = -theta / nu``, which gives every derivative in terms of
    ``theta`` itself.
    """
    nu = params.nu
    lam = params.lam_i(i)
    th = theta(i, masses, params, x, t)
    x, t = np.broadcast_arrays(np.asarray(x, float), np.asarray(t, float))
    T = t + 1.0
    K = 1.0 / np.sqrt(2 * nu * T)
    z = (x - lam * T) * K
    z_t = -lam * K - z / (2 * T)
    dlog_x = -2 * z * K + th / nu
    th_x = th * dlog_x
    th_xx = th_x * dlog_x + th * (-2 * K * K + th_x / nu)
    # d/dt of log K, of -z^2 and of -log phi (phi_t / phi = -theta z_t / (nu K))
    th_t = th * (-1.0 / (2 * T) - 2 * z * z_t + th * z_t / (nu * K))
    return th, th_x, th_xx, th_t


def cole_hopf_phi(i: int, masses: WaveMasses, params: ModelParams, x, t):
    """``(phi, phi_x)`` with ``theta_i = -nu phi_x / phi``; ``phi`` solves the advected heat equation."""
    nu = params.nu
    E = _check_mass(masses[i], nu)
    x, t = np.broadcast_arrays(np.asarray(x, float), np.asarray(t, float))
    T = t + 1.0
    K = 1.0 / np.sqrt(2 * nu * T)
    z = (x - params.lam_i(i) * T) * K
    phi = 1.0 + 0.5 * E * erfc(z)
    phi_x = -E * K / _SQRT_PI * np.exp(-z * z)
    return phi, phi_x


def burgers_residual(i: int, masses: WaveMasses, params: ModelParams, grid, t: float,
                     mode: str = "analytic") -> float:
    """Sup-norm of the Burgers residual of ``theta_i`` on ``grid`` at time ``t``.

    ``mode="analytic"`` uses :func:`theta_derivatives`; ``mode="fd"`` uses
    second-order central differences with spacing ``grid.dx`` in ``x`` and ``t``.
    """
    if t <= 0:
        raise ValueError("residual is evaluated at t > 0")
    x = grid.x
    lam, nu = params.lam_i(i), params.nu
    if mode == "analytic":
        th, th_x, th_xx, th_t = theta_derivatives(i, masses, params, x, t)
    elif mode == "fd":
        h = grid.dx
        f = lambda xx, tt: theta(i, masses, params, xx, tt)
        th = f(x, t)
        th_x = (f(x + h, t) - f(x - h, t)) / (2 * h)
        th_xx = (f(x + h, t) - 2 * th + f(x - h, t)) / h**2
        th_t = (f(x, t + h) - f(x, t - h)) / (2 * h)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    res = th_t + lam * th_x + th * th_x - 0.5 * nu * th_xx
    return float(np.abs(res).max())


def profile_g(z, nu: float):
    """``g(z) = d/dz exp(-z^2 / (2 nu)) = -(z / nu) exp(-z^2 / (2 nu))``."""
    z = np.asarray(z, dtype=float)
    return -(z / nu) * np.exp(-z * z / (2 * nu))


def profile_f0(i: int, masses: WaveMasses, nu: float, z):
    """Similarity profile of ``theta_i``: ``theta_i = (t+1)^(-1/2) f_{i;0}(z)``."""
    E = _check_mass(masses[i], nu)
    z = np.asarray(z, dtype=float)
    if E == 0:
        return np.zeros(z.shape)
    s = z / np.sqrt(2 * nu)
    return np.sqrt(nu / 2) * E / _SQRT_PI * _gauss_over_phi(E, s)


@lru_cache(maxsize=None)
def _gl(m: int):
    return np.polynomial.legendre.leggauss(m)


def _composite(a, b, panels: int, order: int):
    """Composite Gauss-Legendre nodes/weights on rows ``[a_k, b_k]``; shapes (k, panels*order)."""
    xg, wg = _gl(order)
    edges = a[:, None] + (b - a)[:, None] * np.linspace(0, 1, panels + 1)[None, :]
    lo, hi = edges[:, :-1], edges[:, 1:]
    half = 0.5 * (hi - lo)
    nodes = (0.5 * (hi + lo))[:, :, None] + half[:, :, None] * xg[None, None, :]
    wts = half[:, :, None] * wg[None, None, :]
    k = len(a)
    return nodes.reshape(k, -1), wts.reshape(k, -1)


def profile_fn(i: int, n: int, nu: float, z):
    """Higher-order profile

        f_{i;n}(z) = int_{s z}^inf (xi - s z)^{-(1 - 2^-n)} xi exp(-xi^2 / (2 nu)) dxi,

    with ``s = (-1)^(i-1)``.  On ``[s z, s z + 1]`` the substitution
    ``xi = s z + r^(2^n)`` removes the endpoint singularity; the rest of the
    range is regular and truncated where the Gaussian is below 1e-30.
    """
    if n < 1:
        raise ValueError("profile_fn needs n >= 1")
    z = np.asarray(z, dtype=float)
    shape = z.shape
    w = ((-1) ** (i - 1)) * z.ravel()
    N = 2**n
    q = 1.0 - 1.0 / N
    sig = np.sqrt(nu)
    cut = 12.0 * sig

    # singular piece in r, xi = w + r^N, r in [0, 1]
    r, wr = _composite(np.zeros_like(w), np.ones_like(w), 8, 24)
    xi = w[:, None] + r**N
    part1 = (N * xi * np.exp(-xi * xi / (2 * nu)) * wr).sum(axis=1)

    # regular piece on [w + 1, upper]
    lo = np.maximum(w + 1.0, -cut)
    hi = np.maximum(lo, cut) + np.where(w + 1.0 > cut, cut, 0.0)
    xi, wx = _composite(lo, hi, 32, 16)
    part2 = ((xi - w[:, None]) ** (-q) * xi * np.exp(-xi * xi / (2 * nu)) * wx).sum(axis=1)
    return (part1 + part2).reshape(shape)


def _zgrid(nu: float, span: float = 14.0, m: int = 8001):
    s = np.sqrt(nu)
    z = np.linspace(-span * s, span * s, m)
    return z, z[1] - z[0]


@dataclass(frozen=True)
class AmplitudeConstants:
    """Amplitudes ``A_{i;n}``, ``B_{i;n}`` and the profile integrals behind them.

    ``a[(i, n)]`` is the mass integral of ``f_{i';0} f_{i';n-1}`` that feeds
    ``A_{i;n}``, ``b[(i, n)]`` the integral of ``f_{i';0} g`` (zero weight at
    ``n = 1``), and ``b_eta[(i, n)]`` the integral of ``f_{i;0} f_{i;n}`` that
    feeds ``B_{i;n}``.  ``B`` is a leading-order value; its next correction is
    ``O(eps^4)`` at ``n = 1``.
    """

    masses: WaveMasses
    n_max: int
    A: dict = field(default_factory=dict)
    B: dict = field(default_factory=dict)
    a: dict = field(default_factory=dict)
    b: dict = field(default_factory=dict)
    b_eta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        key = lambda k: f"{k[0]};{k[1]}"
        return {
            name: {key(k): v for k, v in getattr(self, name).items()}
            for name in ("A", "B", "a", "b", "b_eta")
        }


def amplitude_constants(masses: WaveMasses, params: ModelParams, n_max: int = 2,
                        eps_cap: float = MASS_CAP) -> AmplitudeConstants:
    """Leading amplitudes of the collapse ``xi_{i;n} ~ (t+1)^(-alpha_{n-1}/2) (A f_{i;n} + B g)``.

    A source ``d/dx[m (s+1)^-q G_{lam_i'}(x, s)]`` with mass decaying like
    ``(s+1)^-q`` and a heat Gaussian on the opposite characteristic produces, on
    characteristic ``i``, ``(-1)^(i-1) m (2c)^(q-1) / (nu sqrt(2 pi nu))`` times
    ``(t+1)^(-(1+q)/2) f_{i;n}``.  Here ``q = alpha_{n-2}/2`` and ``m`` collects the
    ``f_{i';n-1}`` and ``g`` parts of ``xi_{i';n-1}`` weighted by ``theta_i'``.
    The self-interaction with ``theta_i`` then yields the ``g`` part with
    ``B_{i;n} = -A_{i;n} b_eta / ((1 - alpha_{n-1}/2) sqrt(2 pi nu))``.
    """
    nu, c = params.nu, params.c
    if masses.eps / nu > eps_cap:
        raise ValueError("masses too large for the small-amplitude constants")
    z, dz = _zgrid(nu)
    f0 = {i: profile_f0(i, masses, nu, z) for i in (1, 2)}
    g = profile_g(z, nu)
    prof = {}  # (i, n) -> f_{i;n} on z
    for i in (1, 2):
        prof[(i, 0)] = f0[i]
        for n in range(1, n_max + 1):
            prof[(i, n)] = profile_fn(i, n, nu, z)

    def integ(h):
        val = float(np.trapezoid(h, dx=dz))
        if not np.isfinite(val):
            raise ArithmeticError("profile quadrature did not converge")
        return val

    out = AmplitudeConstants(masses, n_max)
    # level 0: xi_{i;0} = theta_i / 2, i.e. A_{i;0} = 1/2 on f_{i;0}, B_{i;0} = 0
    A = {(1, 0): 0.5, (2, 0): 0.5}
    B = {(1, 0): 0.0, (2, 0): 0.0}
    for n in range(1, n_max + 1):
        q = float(alpha_beta(n - 2)[0]) / 2
        an = float(alpha_beta(n - 1)[0])
        for i in (1, 2):
            ip = 3 - i
            a_in = integ(f0[ip] * prof[(ip, n - 1)])
            b_in = integ(f0[ip] * g) if n > 1 else 0.0
            m = A[(ip, n - 1)] * a_in + B[(ip, n - 1)] * b_in
            A[(i, n)] = (-1) ** (i - 1) * m * (2 * c) ** (q - 1) / (nu * np.sqrt(2 * np.pi * nu))
            b_eta = integ(f0[i] * prof[(i, n)])
            B[(i, n)] = -A[(i, n)] * b_eta / ((1 - an / 2) * np.sqrt(2 * np.pi * nu))
            out.a[(i, n)] = a_in
            out.b[(i, n)] = b_in
            out.b_eta[(i, n)] = b_eta
    for k in A:
        if k[1] >= 1:
            out.A[k] = A[k]
            out.B[k] = B[k]
    return out
