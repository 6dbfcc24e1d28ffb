"""Post-processing: expansion terms, remainders, norms, probes, power-law fits
and similarity collapse.

Everything here works on finished runs (immutable arrays); decay exponents are
always measured against ``t + 1``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .cascade import WaveHierarchy
from .model import Grid1D, ModelParams, Psi, ScalarField, WaveMasses, alpha_beta
from .pde import Trajectory
from .waves import profile_fn, profile_g, theta, theta_derivatives

DEFAULT_WINDOW = (50.0, 800.0)


@dataclass(frozen=True)
class DecayFit:
    exponent: float
    intercept: float
    r_squared: float
    window: tuple
    n: int

    def to_dict(self) -> dict:
        return asdict(self)


def fit_power_law(times, values, window=DEFAULT_WINDOW) -> DecayFit:
    """Least squares of ``log value`` against ``log(t + 1)`` over ``window``."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    lo, hi = window
    if not lo < hi:
        raise ValueError("fit window needs t_lo < t_hi")
    m = (t >= lo * (1 - 1e-12)) & (t <= hi * (1 + 1e-12))
    if m.sum() < 6:
        raise ValueError(f"only {int(m.sum())} samples in window {window}; need 6")
    if np.any(~(v[m] > 0)):
        raise ValueError("power-law fit needs positive values in the window")
    X = np.log(t[m] + 1.0)
    Y = np.log(v[m])
    slope, icept = np.polyfit(X, Y, 1)
    ss_res = float(np.sum((Y - (slope * X + icept)) ** 2))
    ss_tot = float(np.sum((Y - Y.mean()) ** 2))
    # a flat series is fitted exactly; its spread is pure rounding
    r2 = 1.0 if ss_tot <= 1e-24 * max(1.0, float(np.sum(Y * Y))) else max(0.0, 1.0 - ss_res / ss_tot)
    return DecayFit(float(slope), float(icept), r2, (float(lo), float(hi)), int(m.sum()))


def lp_norm(f, p=2, dx: float | None = None) -> float:
    """Trapezoidal ``L^p`` norm for finite ``p >= 1``, grid max for ``p = inf``."""
    if isinstance(f, ScalarField):
        dx = f.grid.dx if dx is None else dx
        f = f.values
    f = np.asarray(f, dtype=float)
    if not np.all(np.isfinite(f)):
        raise ValueError("field contains non-finite values")
    if p == np.inf or p == "inf":
        return float(np.abs(f).max()) if f.size else 0.0
    p = float(p)
    if p < 1:
        raise ValueError("L^p norm needs p >= 1")
    if dx is None:
        raise ValueError("finite p needs the grid spacing")
    return float(np.trapezoid(np.abs(f) ** p, dx=dx) ** (1.0 / p))


def lp_series(fields: np.ndarray, dx: float, ps=(1, 2, np.inf)) -> dict:
    """Norms along the last axis of ``fields`` for every ``p``; keys ``1, 2, inf``."""
    a = np.abs(fields)
    out = {}
    for p in ps:
        if p == np.inf:
            out["inf"] = a.max(axis=-1)
        else:
            out[str(int(p)) if float(p).is_integer() else str(p)] = np.trapezoid(a**p, dx=dx, axis=-1) ** (1 / p)
    return out


def probe(times, fields, grid: Grid1D, mode: str = "origin", x0: float = 0.0,
          lam: float | None = None) -> np.ndarray:
    """Linearly interpolated values at ``0``, ``x0`` or ``lam t + x0`` for each checkpoint."""
    times = np.asarray(times, dtype=float)
    fields = np.asarray(fields, dtype=float)
    if fields.shape != (len(times), grid.n):
        raise ValueError("need one field per checkpoint")
    if mode == "origin":
        xs = np.zeros_like(times)
    elif mode == "fixed":
        xs = np.full_like(times, x0)
    elif mode == "characteristic":
        if lam is None:
            raise ValueError("characteristic probe needs lam")
        xs = lam * times + x0
    else:
        raise ValueError(f"unknown probe mode {mode!r}")
    if np.any(xs < grid.x_min) or np.any(xs > grid.x_max):
        raise ValueError("probe location outside the grid")
    s = (xs - grid.x_min) / grid.dx
    j = np.clip(np.floor(s).astype(int), 0, grid.n - 2)
    w = s - j
    rows = np.arange(len(times))
    return (1 - w) * fields[rows, j] + w * fields[rows, j + 1]


def sample(values, grid: Grid1D, x: float, half: int = 8) -> float:
    """Cubic-spline value of a grid field at an off-grid point.

    Linear interpolation would add an ``O(dx^2)`` error whose constant depends
    on where ``x`` falls between nodes, which spoils grid-refinement ratios.
    """
    if not grid.x_min <= x <= grid.x_max:
        raise ValueError("sample location outside the grid")
    j = int(round((x - grid.x_min) / grid.dx))
    lo, hi = max(0, j - half), min(grid.n, j + half + 1)
    return float(CubicSpline(grid.x[lo:hi], np.asarray(values)[lo:hi])(x))


def ddx4(f: np.ndarray, dx: float) -> np.ndarray:
    """Fourth-order central first derivative along the last axis (2nd order at the edges)."""
    f = np.asarray(f, dtype=float)
    out = np.zeros_like(f)
    out[..., 2:-2] = (f[..., :-4] - 8 * f[..., 1:-3] + 8 * f[..., 3:-1] - f[..., 4:]) / (12 * dx)
    out[..., 1] = (f[..., 2] - f[..., 0]) / (2 * dx)
    out[..., -2] = (f[..., -1] - f[..., -3]) / (2 * dx)
    out[..., 0] = (f[..., 1] - f[..., 0]) / dx
    out[..., -1] = (f[..., -1] - f[..., -2]) / dx
    return out


def expansion_terms(h: WaveHierarchy, params: ModelParams, k: int) -> np.ndarray:
    """``u_{i;k}`` for both families at every checkpoint, shape ``(nt, 2, n)``.

    ``u_{i;1} = xi_{i;1} + gamma_i' d_x theta_i'`` (full ``theta``, analytic
    derivative) and ``u_{i;k} = xi_{i;k} + gamma_i' d_x xi_{i';k-1}`` for ``k >= 2``.
    """
    if not 1 <= k <= h.n_max:
        raise ValueError(f"hierarchy depth {h.n_max} does not cover k = {k}")
    x = h.grid.x
    out = np.array(h.xi[:, :, k - 1], copy=True)
    for i in (1, 2):
        ip = 3 - i
        g = params.gamma_i(ip)
        if k == 1:
            for m, t in enumerate(h.times):
                out[m, i - 1] += g * theta_derivatives(ip, h.masses, params, x, t)[1]
        else:
            out[:, i - 1] += g * ddx4(h.xi[:, ip - 1, k - 2], h.grid.dx)
    return out


def theta_stack(h_or_times, masses, params: ModelParams, grid: Grid1D) -> np.ndarray:
    times = h_or_times.times if isinstance(h_or_times, WaveHierarchy) else h_or_times
    return np.array([[theta(i, masses, params, grid.x, t) for i in (1, 2)] for t in times])


@dataclass
class RemainderSeries:
    times: np.ndarray
    n: int
    v: np.ndarray  # (nt, 2, nx)
    probes: dict = field(default_factory=dict)
    norms: dict = field(default_factory=dict)
    normalized: np.ndarray | None = None  # (nt, 2)


def default_probes(params: ModelParams):
    out = [("x=0", "origin", 0.0, None), ("x=5", "fixed", 5.0, None), ("x=-5", "fixed", -5.0, None)]
    for i in (1, 2):
        lam = params.lam_i(i)
        for x0 in (0.0, 5.0, -5.0):
            out.append((f"lam{i}t{x0:+g}", "characteristic", x0, lam))
    return out


def remainder(traj: Trajectory, h: WaveHierarchy | None, params: ModelParams, n: int,
              probes=None, full_terms: bool = True) -> RemainderSeries:
    """``v_i = u_i - theta_i - sum_{k<=n} u_{i;k}`` with probes, norms and ``sup |v_i| / Psi_{i;n}``.

    With ``full_terms=False`` only ``xi_{i;k}`` is subtracted (no ``gamma``
    corrections); near the origin the two agree to exponentially small terms.
    """
    if n > 0:
        if h is None or h.grid != traj.grid:
            raise ValueError("trajectory and hierarchy must share the grid")
        if len(h.times) != len(traj.times) or np.any(np.abs(h.times - traj.times) > 1e-9 * np.maximum(1, traj.times)):
            raise ValueError("trajectory and hierarchy checkpoints differ")
        if h.n_max < n:
            raise ValueError("hierarchy too shallow")
    grid = traj.grid
    x = grid.x
    if h is not None:
        M = h.masses
    else:
        # initial integrals of (v - 1, u) are logged at t = 0
        m = params.left @ traj.conserved[0, 1:]
        M = WaveMasses(float(m[0]), float(m[1]))
    v = traj.characteristic() - theta_stack(traj.times, M, params, grid)
    for k in range(1, n + 1):
        v -= expansion_terms(h, params, k) if full_terms else h.xi[:, :, k - 1]
    pr = {}
    for name, mode, x0, lam in (default_probes(params) if probes is None else probes):
        try:
            pr[name] = np.stack([probe(traj.times, v[:, i], grid, mode, x0, lam) for i in (0, 1)], axis=1)
        except ValueError:
            continue
    norms = lp_series(v, grid.dx)
    norm_sup = np.empty((len(traj.times), 2))
    nn = max(n, 0)
    for m, t in enumerate(traj.times):
        for i in (1, 2):
            norm_sup[m, i - 1] = np.max(np.abs(v[m, i - 1]) / Psi(i, nn, x, t, params))
    return RemainderSeries(np.asarray(traj.times), n, v, pr, norms, norm_sup)


@dataclass
class CollapseFit:
    times: np.ndarray
    A: np.ndarray
    B: np.ndarray
    residual: np.ndarray
    cond: np.ndarray
    A_limit: float
    B_limit: float


def profile_collapse(h: WaveHierarchy, params: ModelParams, i: int = 1, n: int = 1,
                     K: float = 5.0, z_max: float = 8.0, t_min: float = 10.0,
                     max_points: int = 3000, cond_max: float = 1e8) -> CollapseFit:
    """Fit ``(t+1)^(alpha_{n-1}/2) xi_{i;n}`` to ``A f_{i;n}(z) + B g(z)`` per checkpoint.

    ``z = (x - lam_i (t+1)) / sqrt(t+1)`` over the region ``(-1)^(i-1) x >= -K``
    and ``(-1)^(i-1) z <= z_max sqrt(nu)``.  The large-t limits are the
    fits at the last checkpoint.
    """
    a = float(alpha_beta(n - 1)[0])
    s = (-1) ** (i - 1)
    x = h.grid.x
    nu = params.nu
    ts, As, Bs, res, conds = [], [], [], [], []
    for m, t in enumerate(h.times):
        if t < t_min:
            continue
        T = t + 1.0
        z = (x - params.lam_i(i) * T) / math.sqrt(T)
        sel = np.nonzero((s * x >= -K) & (s * z <= z_max * math.sqrt(nu)))[0]
        if len(sel) > max_points:
            sel = sel[:: int(math.ceil(len(sel) / max_points))]
        y = T ** (a / 2) * h.xi[m, i - 1, n - 1, sel]
        basis = np.column_stack([profile_fn(i, n, nu, z[sel]), profile_g(z[sel], nu)])
        sv = np.linalg.svd(basis, compute_uv=False)
        cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else np.inf
        if cond > cond_max:
            raise np.linalg.LinAlgError(f"collapse basis ill-conditioned (cond {cond:.2e}) at t = {t:g}")
        coef, *_ = np.linalg.lstsq(basis, y, rcond=None)
        ts.append(t)
        As.append(coef[0])
        Bs.append(coef[1])
        res.append(float(np.abs(y - basis @ coef).max()))
        conds.append(cond)
    if not ts:
        raise ValueError(f"no checkpoints with t >= {t_min}")
    return CollapseFit(np.array(ts), np.array(As), np.array(Bs), np.array(res), np.array(conds),
                       float(As[-1]), float(Bs[-1]))


# --- verification claims ----------------------------------------------------

@dataclass
class Claim:
    """A checked statement: ``kind`` is ``exponent`` (``|measured - expected| <= tol``),
    ``le`` (``measured <= expected``) or ``lt`` (``measured < expected``)."""

    id: str
    anchor: str
    measured: float
    expected: float
    tol: float
    passed: bool
    kind: str = "exponent"
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def evaluate_claim(kind: str, measured: float, expected: float, tol: float) -> bool:
    if not math.isfinite(measured):
        return False
    if kind == "exponent":
        return abs(measured - expected) <= tol
    if kind == "le":
        return measured <= expected
    if kind == "lt":
        return measured < expected
    raise ValueError(f"unknown claim kind {kind!r}")


def exponent_claim(cid: str, anchor: str, fit: DecayFit, expected: float, tol: float) -> Claim:
    ok = evaluate_claim("exponent", fit.exponent, expected, tol)
    return Claim(cid, anchor, fit.exponent, expected, tol, ok, "exponent", fit.to_dict())


def bound_claim(cid: str, anchor: str, measured: float, bound: float, strict: bool = False,
                detail: dict | None = None) -> Claim:
    kind = "lt" if strict else "le"
    return Claim(cid, anchor, float(measured), float(bound), 0.0,
                 evaluate_claim(kind, float(measured), float(bound), 0.0), kind, detail or {})
