"""Green's function of the linearised p-system and its leading-order profile.

The linearisation about ``(1, 0)`` is ``U_t + A U_x = diag(0, nu) U_xx`` with
``A = [[0, -1], [-c^2, 0]]``.  Its Green's function ``G`` is approximated by

    G*(x, t) = sum_{+-} (2 sqrt(2 pi nu t))^-1 exp(-(x -+ c t)^2 / (2 nu t)) P_{+-}

plus the singular part ``exp(-c^2 t / nu) delta(x) Q_0``.  Numerically ``G``
is computed from mollified data ``rho_sigma(x) e_j`` (Gaussian of standard
deviation ``sigma``); then ``G* * rho_sigma`` is again a pair of Gaussians
with variance ``nu t + sigma^2`` and the comparison is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cascade import DEFAULT_CFL, DEFAULT_MARGIN, check_domain
from .model import Grid1D, ModelParams, ScalarField
from .pde import PSystemMarcher


def _blocks(c: float):
    plus = np.array([[1.0, -1.0 / c], [-c, 1.0]])
    minus = np.array([[1.0, 1.0 / c], [c, 1.0]])
    return plus, minus


def _gauss(x, mean, var):
    return np.exp(-((x - mean) ** 2) / (2 * var)) / np.sqrt(2 * np.pi * var)


def _dgauss(x, mean, var):
    return -(x - mean) / var * _gauss(x, mean, var)


def gstar(x, t: float, params: ModelParams, sigma: float = 0.0) -> np.ndarray:
    """``G*(x, t)`` (``sigma = 0``) or ``G* * rho_sigma``; shape ``x.shape + (2, 2)``."""
    if not t > 0 and sigma == 0:
        raise ValueError("G* needs t > 0")
    c, nu = params.c, params.nu
    x = np.asarray(x, dtype=float)
    var = nu * t + sigma**2
    plus, minus = _blocks(c)
    gp = 0.5 * _gauss(x, c * t, var)
    gm = 0.5 * _gauss(x, -c * t, var)
    return gp[..., None, None] * plus + gm[..., None, None] * minus


def singular_part(x, t: float, params: ModelParams, sigma: float) -> np.ndarray:
    """``exp(-c^2 t / nu) rho_sigma(x) Q_0``; shape ``x.shape + (2, 2)``."""
    Q0, _ = q_coefficients(0, params)
    x = np.asarray(x, dtype=float)
    rho = _gauss(x, 0.0, sigma**2) * math.exp(-params.c**2 * t / params.nu)
    return rho[..., None, None] * Q0


def gstar_ij(i: int, j: int, x, t: float, params: ModelParams, sigma: float = 0.0):
    """``g*_{ij} = l_i G* r_j``: the heat kernel along ``lam_i`` when ``i == j``, else 0."""
    x = np.asarray(x, dtype=float)
    if i != j:
        return np.zeros_like(x)
    return _gauss(x, params.lam_i(i) * t, params.nu * t + sigma**2)


def diagonalise(G: np.ndarray, params: ModelParams) -> np.ndarray:
    """``L G R`` for ``G`` of shape ``(..., 2, 2)`` (or ``(2, 2, n)`` fields)."""
    if G.shape[:2] == (2, 2) and G.ndim == 3:
        return np.einsum("ia,abn,bj->ijn", params.left, G, params.right)
    return params.left @ G @ params.right


def q_coefficients(k: int, params: ModelParams):
    """``(Q_k, q)`` with ``q[i-1] = l_i Q_k [r_1 r_2]``; only ``k = 0, 1`` are known in closed form."""
    c, nu = params.c, params.nu
    if k == 0:
        Q = np.array([[1.0, 0.0], [0.0, 0.0]])
    elif k == 1:
        Q = np.array([[0.0, -1.0 / nu], [-(c**2) / nu, 0.0]])
    else:
        raise ValueError("Q_k is available for k = 0, 1 only")
    return Q, params.left @ Q @ params.right


@dataclass(frozen=True)
class Matrix2Field:
    grid: Grid1D
    t: float
    values: np.ndarray  # (2, 2, n)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (2, 2, self.grid.n):
            raise ValueError("Matrix2Field needs shape (2, 2, n)")
        if not np.all(np.isfinite(v)):
            raise ValueError("non-finite Green's function entry")

    def entry(self, a: int, b: int) -> ScalarField:
        return ScalarField(self.grid, self.values[a - 1, b - 1], self.t)

    def mass(self) -> np.ndarray:
        return np.trapezoid(self.values, dx=self.grid.dx, axis=-1)


@dataclass
class GreenTrajectory:
    grid: Grid1D
    params: ModelParams
    sigma: float
    times: np.ndarray
    G: np.ndarray  # (nt, 2, 2, n): G[k, a, j] = component a of column j

    def at(self, k: int) -> Matrix2Field:
        return Matrix2Field(self.grid, float(self.times[k]), self.G[k])

    def masses(self) -> np.ndarray:
        return np.trapezoid(self.G, dx=self.grid.dx, axis=-1)


def numerical_green(params: ModelParams, sigma: float, grid: Grid1D, t_end: float,
                    checkpoints, columns=(1, 2), *, cfl: float = DEFAULT_CFL,
                    margin: float = DEFAULT_MARGIN, backend=None) -> GreenTrajectory:
    """Both columns of ``G * rho_sigma`` from the linearised solver."""
    if sigma < 3 * grid.dx * (1 - 1e-12):
        raise ValueError("mollifier width must be at least 3 dx")
    check_domain(grid, params.c, t_end, margin)
    x = grid.x
    rho = _gauss(x, 0.0, sigma**2)
    m = PSystemMarcher(grid, params, cfl * grid.dx / params.c, linear=True, backend=backend)
    G = None
    times = None
    for j in columns:
        w0 = rho.copy() if j == 1 else np.zeros_like(x)
        u0 = rho.copy() if j == 2 else np.zeros_like(x)
        ts, W, U, _ = m.run(w0, u0, t_end, checkpoints)
        if G is None:
            times = ts
            G = np.zeros((len(ts), 2, 2, grid.n))
        G[:, 0, j - 1] = W
        G[:, 1, j - 1] = U
    return GreenTrajectory(grid, params, sigma, times, G)


def structure_residual(traj: GreenTrajectory) -> tuple[np.ndarray, np.ndarray]:
    """``sup_x |G_num - G*_sigma - singular_sigma|`` and ``sup_x |G*_sigma|`` per checkpoint."""
    x = traj.grid.x
    res, ref = [], []
    for k, t in enumerate(traj.times):
        gs = np.moveaxis(gstar(x, t, traj.params, traj.sigma), 0, -1)
        sg = np.moveaxis(singular_part(x, t, traj.params, traj.sigma), 0, -1)
        res.append(np.abs(traj.G[k] - gs - sg).max())
        ref.append(np.abs(gs).max())
    return np.array(res), np.array(ref)


def refined_residual(i: int, traj: GreenTrajectory, correct: bool = True) -> np.ndarray:
    """Sup of ``|g_i - g_i* - gamma_i' d_x g_i'* - singular|`` over ``|x - lam_i' t| <= sqrt(t)``.

    ``g_i = l_i G [r_1 r_2]`` from the numerical trajectory, all profiles
    mollified.  With ``correct=False`` the ``gamma`` term is left out.
    """
    p = traj.params
    ip = 3 - i
    x = traj.grid.x
    _, q0 = q_coefficients(0, p)
    out = []
    for k, t in enumerate(traj.times):
        gi = (p.left[i - 1] @ np.moveaxis(traj.G[k], -1, 0) @ p.right).T  # (2, n): columns j
        var = p.nu * t + traj.sigma**2
        ref = np.zeros_like(gi)
        ref[i - 1] += _gauss(x, p.lam_i(i) * t, var)
        if correct:
            ref[ip - 1] += p.gamma_i(ip) * _dgauss(x, p.lam_i(ip) * t, var)
        rho = _gauss(x, 0.0, traj.sigma**2) * math.exp(-p.c**2 * t / p.nu)
        ref += q0[i - 1][:, None] * rho
        mask = np.abs(x - p.lam_i(ip) * t) <= math.sqrt(t)
        out.append(np.abs(gi - ref)[:, mask].max())
    return np.array(out)
