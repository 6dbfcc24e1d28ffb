"""Nonlinear p-system solver, initial-data builders and the smallness functional.

The system is marched in perturbation variables ``w = v - 1`` and ``u``:

    w_t = u_x,    u_t = -(p(1 + w) - p(1))_x + nu (u_x / v)_x,

with conservative central differences, the viscous flux at cell faces using
``(1/v_j + 1/v_{j+1}) / 2``, and the same IMEX trapezoidal stepping as the
cascade (Crank-Nicolson on the viscous term with ``nu / v`` frozen at the
stage state, Heun on the rest).  Both ``int w`` and ``int u`` telescope
exactly, so they drift only by rounding and boundary flux.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .cascade import DEFAULT_CFL, DEFAULT_MARGIN, check_domain, geometric_checkpoints
from .model import (
    BOUNDARY_THRESHOLD,
    DomainTooSmallError,
    FlowState,
    Grid1D,
    ModelParams,
    ScalarField,
    WaveMasses,
    alpha_beta,
    boundary_excess,
    masses as char_masses,
    to_characteristic,
)
from .waves import theta

KINDS = ("gaussian", "dgaussian", "diffusion_wave", "custom")


class PositivityError(RuntimeError):
    """Specific volume reached zero or below."""


class ConservationError(RuntimeError):
    """A conserved integral drifted beyond tolerance."""


@dataclass(frozen=True)
class InitialData:
    kind: str
    a_v: float
    a_u: float
    w: float
    state: FlowState
    masses: WaveMasses

    @property
    def grid(self) -> Grid1D:
        return self.state.grid

    def to_dict(self) -> dict:
        return {"kind": self.kind, "a_v": self.a_v, "a_u": self.a_u, "w": self.w,
                "M1": self.masses.M1, "M2": self.masses.M2}


def build_initial_data(kind: str, a_v: float, a_u: float, w: float, grid: Grid1D,
                       params: ModelParams | None = None, table=None) -> InitialData:
    """Smooth, rapidly decaying data at ``t = 0``.

    ``gaussian``
        ``(v - 1, u) = (a_v, a_u) exp(-x^2 / w^2)``.
    ``dgaussian``
        ``(a_v, a_u) w d/dx exp(-x^2 / w^2)``; zero mass in both components.
    ``diffusion_wave``
        characteristic components ``u_i(x, 0) = theta_i(x, 0)`` with the masses
        the ``gaussian`` data of the same amplitudes would carry.  This removes
        the transient from the mismatch of higher moments.
    ``custom``
        ``table = (dv, u)`` arrays on ``grid``.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown initial-data kind {kind!r}; choose from {KINDS}")
    if not w > 0 and kind != "custom":
        raise ValueError("width must be positive")
    if params is None:
        from .model import derive_params
        params = derive_params()
    x = grid.x
    if kind == "gaussian":
        g = np.exp(-((x / w) ** 2))
        dv, u = a_v * g, a_u * g
    elif kind == "dgaussian":
        g = -2 * (x / w) * np.exp(-((x / w) ** 2))
        dv, u = a_v * g, a_u * g
    elif kind == "diffusion_wave":
        m = params.left @ np.array([a_v, a_u]) * (w * math.sqrt(math.pi))
        M = WaveMasses(float(m[0]), float(m[1]))
        u1 = theta(1, M, params, x, 0.0)
        u2 = theta(2, M, params, x, 0.0)
        dv, u = params.right @ np.vstack([u1, u2])
    else:
        if table is None:
            raise ValueError("custom data needs table=(dv, u)")
        dv, u = (np.asarray(a, dtype=float) for a in table)
    if np.any(dv <= -0.5):
        raise ValueError("initial specific volume must stay above 1/2")
    state = FlowState(ScalarField(grid, dv, 0.0), ScalarField(grid, u, 0.0))
    u1, u2 = to_characteristic(state, params)
    return InitialData(kind, float(a_v), float(a_u), float(w), state, char_masses(u1, u2))


def _hs_norm(f: np.ndarray, dx: float, s: int) -> float:
    # zero padding to twice the length keeps the periodic wrap away from the data
    n = len(f)
    F = np.fft.rfft(f, 2 * n)
    k = 2 * np.pi * np.fft.rfftfreq(2 * n, d=dx)
    wgt = sum(k ** (2 * j) for j in range(s + 1))
    # Parseval for the one-sided spectrum
    dens = np.abs(F) ** 2 * wgt
    tot = 2 * dens.sum() - dens[0] - (dens[-1] if (2 * n) % 2 == 0 else 0.0)
    return math.sqrt(max(tot, 0.0) * dx / (2 * n))


def smallness_delta(data: InitialData | FlowState, n: int = 1) -> float:
    """Discrete value of the smallness functional that controls the expansion.

    ``||u0||_{H^6}`` (Fourier, derivatives up to order 6)
    ``+ sup (|x|+1)^alpha_n |u0| + (|x|+1)^{5/4} |u0'|``
    ``+ sup_{x>0} (|x|+1)^beta_n (|u0^-(-x)| + |u0^+(x)|)``,
    with ``|.|`` the Euclidean norm of the pair ``(v0 - 1, u0)`` and the
    antiderivatives by cumulative trapezoidal quadrature from either end.
    """
    st = data.state if isinstance(data, InitialData) else data
    g = st.grid
    x, dx = g.x, g.dx
    comps = [st.dv.values, st.u.values]
    a, b = (float(q) for q in alpha_beta(n))
    hs = math.sqrt(sum(_hs_norm(f, dx, 6) ** 2 for f in comps))
    amp = np.hypot(*comps)
    der = np.hypot(*(np.gradient(f, dx, edge_order=2) for f in comps))
    sup1 = float(np.max((np.abs(x) + 1) ** a * amp + (np.abs(x) + 1) ** 1.25 * der))

    def cumtrap(f):
        out = np.zeros_like(f)
        out[1:] = np.cumsum(0.5 * (f[1:] + f[:-1])) * dx
        return out

    minus = np.hypot(*(cumtrap(f) for f in comps))             # u0^-(x)
    plus = np.hypot(*(cumtrap(f[::-1])[::-1] for f in comps))  # u0^+(x)
    pos = x > 0
    # u0^-(-x) on x > 0 is the mirror of the left half
    xs = x[pos]
    m_mirror = np.interp(-xs, x, minus)
    sup2 = float(np.max((xs + 1) ** b * (m_mirror + plus[pos]))) if pos.any() else 0.0
    return hs + sup1 + sup2


@dataclass
class Trajectory:
    grid: Grid1D
    params: ModelParams
    times: np.ndarray
    dv: np.ndarray
    u: np.ndarray
    conserved: np.ndarray  # rows (t, int dv, int u)
    meta: dict = field(default_factory=dict)

    def index(self, t: float) -> int:
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > 1e-9 * max(1.0, t):
            raise KeyError(f"no checkpoint at t = {t}")
        return k

    def state(self, t: float) -> FlowState:
        k = self.index(t)
        tt = float(self.times[k])
        return FlowState(ScalarField(self.grid, self.dv[k], tt), ScalarField(self.grid, self.u[k], tt),
                         check_boundary=False)

    def characteristic(self) -> np.ndarray:
        """``(nt, 2, n)`` array of ``u_1, u_2`` at every checkpoint."""
        return np.einsum("ij,kjn->kin", self.params.left, np.stack([self.dv, self.u], axis=1))

    def drift(self) -> tuple[float, float]:
        c = self.conserved
        return float(np.max(np.abs(c[:, 1] - c[0, 1]))), float(np.max(np.abs(c[:, 2] - c[0, 2])))


class PSystemMarcher:
    """IMEX trapezoidal stepper for the (optionally linearised) p-system."""

    def __init__(self, grid: Grid1D, params: ModelParams, dt: float, linear: bool = False,
                 backend=None):
        self.k = kernels if backend is None else kernels.load(backend)
        self.backend = kernels.BACKEND if backend is None else backend
        self.grid, self.params, self.dt, self.linear = grid, params, dt, linear
        self.dx = grid.dx
        n = grid.n
        self._face = np.ones(n - 1)
        self._one = np.ones(n - 1)

    def pressure(self, w):
        if self.linear:
            return -self.params.c ** 2 * w
        return self.params.law.dp(w)

    def faces(self, w):
        if self.linear:
            return self._one
        face = np.empty(self.grid.n - 1)
        self.k.viscous_faces(w, face)
        return face

    def explicit(self, w, u):
        inv = 0.5 / self.dx
        ew = np.empty_like(w)
        eu = np.empty_like(u)
        self.k.central_diff(u, inv, ew)
        self.k.central_diff(np.ascontiguousarray(self.pressure(w)), inv, eu)
        eu *= -1.0
        return ew, eu

    def _solve(self, face, h, rhs):
        a = 0.5 * h * self.params.nu / self.dx**2
        n = self.grid.n
        lower = np.zeros(n)
        upper = np.zeros(n)
        diag = np.ones(n)
        lower[1:-1] = -a * face[:-1]
        upper[1:-1] = -a * face[1:]
        diag[1:-1] = 1 + a * (face[:-1] + face[1:])
        fac = self.k.tridiag_factor(lower, diag, upper)
        r = np.ascontiguousarray(rhs[None, :])
        r[0, 0] = r[0, -1] = 0.0
        self.k.tridiag_solve_factored(fac, r)
        return r[0]

    def step(self, w, u, h):
        coef = self.params.nu / self.dx**2
        f0 = self.faces(w)
        d0 = np.empty_like(u)
        self.k.viscous_apply(u, f0, coef, d0)
        ew, eu = self.explicit(w, u)
        ws = w + h * ew
        us = self._solve(f0, h, u + 0.5 * h * d0 + h * eu)
        ew2, eu2 = self.explicit(ws, us)
        fs = self.faces(ws)
        w1 = w + 0.5 * h * (ew + ew2)
        u1 = self._solve(fs, h, u + 0.5 * h * d0 + 0.5 * h * (eu + eu2))
        return w1, u1

    def run(self, w, u, t_end, checkpoints, guard=BOUNDARY_THRESHOLD, log_every=64):
        n_steps = max(1, math.ceil(t_end / self.dt - 1e-9))
        dt = t_end / n_steps
        dx = self.dx
        ck = sorted(float(t) for t in checkpoints)
        times, W, U, cons = [], [], [], []

        def record(tc, wc, uc):
            if np.any(wc <= -1.0):
                raise PositivityError(f"v <= 0 at t = {tc:g}")
            b = max(boundary_excess(wc), boundary_excess(uc))
            if b > guard:
                raise DomainTooSmallError(f"boundary value {b:.3e} exceeds {guard:.1e} at t = {tc:g}")
            times.append(tc)
            W.append(wc.copy())
            U.append(uc.copy())

        t = 0.0
        cons.append((0.0, np.trapezoid(w, dx=dx), np.trapezoid(u, dx=dx)))
        while ck and ck[0] <= 1e-12:
            record(ck.pop(0), w, u)
        for s in range(n_steps):
            t1 = t_end if s == n_steps - 1 else (s + 1) * dt
            while ck and ck[0] < t1 - 1e-9 * max(1.0, t1):
                tc = ck.pop(0)
                record(tc, *(self.step(w, u, tc - t) if tc - t > 1e-12 else (w, u)))
            w, u = self.step(w, u, dt)
            t = t1
            if (s + 1) % log_every == 0 or s == n_steps - 1:
                if not np.all(np.isfinite(u)):
                    raise PositivityError(f"solution blew up before t = {t:g}")
                cons.append((t, np.trapezoid(w, dx=dx), np.trapezoid(u, dx=dx)))
            while ck and ck[0] <= t1 + 1e-9 * max(1.0, t1):
                record(ck.pop(0), w, u)
        return np.array(times), np.array(W), np.array(U), np.array(cons)


def solve_p_system(data: InitialData | FlowState, params: ModelParams, grid: Grid1D | None = None,
                   t_end: float = 800.0, checkpoints=None, *, cfl: float = DEFAULT_CFL,
                   margin: float = DEFAULT_MARGIN, guard: float = BOUNDARY_THRESHOLD,
                   drift_tol: float = 1e-8, delta_cap: float | None = 0.5,
                   linear: bool = False, backend=None) -> Trajectory:
    """March the p-system from ``data`` and return the checkpointed trajectory.

    ``delta_cap`` bounds the sup of the data (a cheap proxy of the smallness
    functional; ``None`` disables it).  Conserved integrals are logged every
    64 steps and checked against ``drift_tol`` relative to the data scale.
    """
    st = data.state if isinstance(data, InitialData) else data
    grid = st.grid if grid is None else grid
    if grid != st.grid:
        raise ValueError("initial data live on a different grid")
    check_domain(grid, params.c, t_end, margin)
    w0 = st.dv.values.copy()
    u0 = st.u.values.copy()
    if delta_cap is not None and max(np.abs(w0).max(), np.abs(u0).max()) > delta_cap:
        raise ValueError("initial perturbation exceeds the small-data cap")
    if not 0 < cfl <= 1:
        raise ValueError(f"CFL number {cfl} outside (0, 1]")
    dt = cfl * grid.dx / params.c
    m = PSystemMarcher(grid, params, dt, linear=linear, backend=backend)
    if checkpoints is None:
        checkpoints = geometric_checkpoints(t_end)
    times, W, U, cons = m.run(w0, u0, t_end, checkpoints, guard=guard)
    scale = max(np.trapezoid(np.abs(w0), dx=grid.dx), np.trapezoid(np.abs(u0), dx=grid.dx), 1e-300)
    dw = np.max(np.abs(cons[:, 1] - cons[0, 1]))
    du = np.max(np.abs(cons[:, 2] - cons[0, 2]))
    if max(dw, du) > drift_tol * scale:
        raise ConservationError(f"conserved integrals drifted by ({dw:.2e}, {du:.2e})")
    return Trajectory(grid, params, times, W, U, cons,
                      meta={"dt": m.dt, "cfl": cfl, "linear": linear, "backend": m.backend,
                            "drift": [float(dw), float(du)]})
