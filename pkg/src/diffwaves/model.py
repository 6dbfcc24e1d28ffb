"""Model parameters, grids, fields and characteristic variables.

Everything downstream works with the perturbation ``(v - 1, u)`` of the
steady state ``(v, u) = (1, 0)`` of the viscous p-system

    v_t - u_x = 0,    u_t + p(v)_x = nu (u_x / v)_x,

and with its characteristic components ``u_i = l_i . (v - 1, u)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

#: default boundary-adequacy threshold on the outer 1% of nodes
BOUNDARY_THRESHOLD = 1e-10


class DomainTooSmallError(RuntimeError):
    """Raised when a field is not negligible near the ends of the grid."""


@dataclass(frozen=True)
class PressureLaw:
    """Barotropic pressure law p(v) with its first two derivatives.

    ``dp`` returns ``p(1 + w) - p(1)`` without cancellation; it is what the
    flow solver differentiates.
    """

    name: str
    p: Callable
    p1: Callable
    p2: Callable
    dp: Callable
    gamma: float | None = None

    def __post_init__(self):
        d1 = float(self.p1(1.0))
        d2 = float(self.p2(1.0))
        if not d1 < 0:
            raise ValueError(f"pressure law needs p'(1) < 0, got {d1}")
        # a tabulated linear law leaves p''(1) at rounding level
        if abs(d2) <= 1e-10 * abs(d1):
            raise ValueError("pressure law needs p''(1) != 0")

    @classmethod
    def gamma_law(cls, gamma: float = 1.4) -> "PressureLaw":
        if not gamma > 1:
            raise ValueError("gamma-law exponent must exceed 1")
        g = float(gamma)
        return cls(
            name=f"gamma-law({g!r})",
            p=lambda v: np.power(v, -g),
            p1=lambda v: -g * np.power(v, -g - 1),
            p2=lambda v: g * (g + 1) * np.power(v, -g - 2),
            dp=lambda w: np.expm1(-g * np.log1p(w)),
            gamma=g,
        )

    @classmethod
    def tabulated(cls, v, p) -> "PressureLaw":
        """Smooth law interpolated through a table ``(v_k, p_k)`` by a cubic spline."""
        spl = CubicSpline(np.asarray(v, float), np.asarray(p, float))
        d1, d2 = spl.derivative(1), spl.derivative(2)
        p_ref = float(spl(1.0))
        return cls(
            name="tabulated",
            p=spl,
            p1=d1,
            p2=d2,
            dp=lambda w: spl(1.0 + np.asarray(w)) - p_ref,
        )

    def to_dict(self) -> dict:
        if self.gamma is not None:
            return {"kind": "gamma", "gamma": self.gamma}
        return {"kind": self.name}


@dataclass(frozen=True)
class ModelParams:
    law: PressureLaw
    nu: float
    c: float
    p2: float
    lam: tuple[float, float]
    gamma: tuple[float, float]
    # rows are l_1, l_2; columns are r_1, r_2
    left: np.ndarray = field(repr=False)
    right: np.ndarray = field(repr=False)

    def l(self, i: int) -> np.ndarray:
        return self.left[i - 1]

    def r(self, i: int) -> np.ndarray:
        return self.right[:, i - 1]

    def lam_i(self, i: int) -> float:
        return self.lam[i - 1]

    def gamma_i(self, i: int) -> float:
        return self.gamma[i - 1]

    def to_dict(self) -> dict:
        return {
            "law": self.law.to_dict(),
            "nu": self.nu,
            "c": self.c,
            "p2": self.p2,
            "lambda": list(self.lam),
            "gamma": list(self.gamma),
        }


def derive_params(law: PressureLaw | None = None, nu: float = 1.0) -> ModelParams:
    """Sound speed, eigenstructure and Green's-function corrections of the model."""
    if law is None:
        law = PressureLaw.gamma_law(1.4)
    if not nu > 0:
        raise ValueError("viscosity must be positive")
    c = float(np.sqrt(-law.p1(1.0)))
    p2 = float(law.p2(1.0))
    if p2 == 0:
        raise ValueError("p''(1) = 0: characteristic variables undefined")
    left = np.array([[(-1) ** i, 1.0 / c] for i in (1, 2)]) * (p2 / (4 * c))
    right = np.array([[(-1) ** i, c] for i in (1, 2)]).T * (2 * c / p2)
    return ModelParams(
        law=law,
        nu=float(nu),
        c=c,
        p2=p2,
        lam=(c, -c),
        gamma=(-nu / (4 * c), nu / (4 * c)),
        left=left,
        right=right,
    )


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid of ``n`` nodes on ``[x_min, x_max]``."""

    x_min: float
    x_max: float
    n: int

    def __post_init__(self):
        if self.n < 16:
            raise ValueError("grid needs at least 16 nodes")
        if not self.x_max > self.x_min:
            raise ValueError("empty grid interval")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.n - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n)

    @classmethod
    def symmetric(cls, half_width: float, dx: float) -> "Grid1D":
        """Odd node count with ``x = 0`` on the centre node; ``dx`` is kept exactly."""
        m = int(np.ceil(half_width / dx - 1e-9))
        return cls(-m * dx, m * dx, 2 * m + 1)

    @classmethod
    def for_run(cls, c: float, t_end: float, dx: float, margin: float = 12.0) -> "Grid1D":
        return cls.symmetric(c * (t_end + 1) + margin * np.sqrt(t_end + 1), dx)

    def to_dict(self) -> dict:
        return {"x_min": self.x_min, "x_max": self.x_max, "n": self.n, "dx": self.dx}


@dataclass(frozen=True)
class ScalarField:
    grid: Grid1D
    values: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.n,):
            raise ValueError(f"field has {vals.shape} values for {self.grid.n} nodes")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field contains non-finite values")
        if self.t < 0:
            raise ValueError("negative time stamp")
        object.__setattr__(self, "values", vals)

    def __add__(self, other):
        return ScalarField(self.grid, self.values + _vals(other), self.t)

    def __sub__(self, other):
        return ScalarField(self.grid, self.values - _vals(other), self.t)

    def __mul__(self, k):
        return ScalarField(self.grid, self.values * k, self.t)

    __rmul__ = __mul__

    def __neg__(self):
        return ScalarField(self.grid, -self.values, self.t)


def _vals(f):
    return f.values if isinstance(f, ScalarField) else f


def boundary_excess(values: np.ndarray, frac: float = 0.01) -> float:
    """Largest |value| on the outer ``frac`` of the nodes at either end."""
    k = max(1, int(np.ceil(frac * len(values))))
    return float(max(np.abs(values[:k]).max(), np.abs(values[-k:]).max()))


@dataclass(frozen=True)
class FlowState:
    """Perturbation ``(v - 1, u)`` on a grid.

    The specific volume is stored as ``dv = v - 1`` so that the small
    perturbation keeps full relative precision.
    """

    dv: ScalarField
    u: ScalarField
    threshold: float = BOUNDARY_THRESHOLD
    check_boundary: bool = True

    def __post_init__(self):
        if self.dv.grid != self.u.grid or self.dv.t != self.u.t:
            raise ValueError("components must share grid and time")
        if np.any(self.dv.values <= -1.0):
            raise ValueError("specific volume must stay positive")
        if self.check_boundary:
            b = max(boundary_excess(self.dv.values), boundary_excess(self.u.values))
            if b > self.threshold:
                raise DomainTooSmallError(
                    f"perturbation {b:.3e} at the domain ends exceeds {self.threshold:.1e}"
                )

    @property
    def v(self) -> ScalarField:
        return ScalarField(self.dv.grid, 1.0 + self.dv.values, self.dv.t)

    @property
    def grid(self) -> Grid1D:
        return self.dv.grid

    @property
    def t(self) -> float:
        return self.dv.t


@dataclass(frozen=True)
class WaveMasses:
    M1: float
    M2: float

    @property
    def eps(self) -> float:
        # absolute values: eps is a smallness scale
        return max(abs(self.M1), abs(self.M2))

    def __getitem__(self, i: int) -> float:
        return (self.M1, self.M2)[i - 1]

    def swapped(self) -> "WaveMasses":
        return WaveMasses(self.M2, self.M1)

    def scaled(self, k: float) -> "WaveMasses":
        return WaveMasses(k * self.M1, k * self.M2)


def to_characteristic(state: FlowState, params: ModelParams) -> tuple[ScalarField, ScalarField]:
    w = np.vstack([state.dv.values, state.u.values])
    u1, u2 = params.left @ w
    return ScalarField(state.grid, u1, state.t), ScalarField(state.grid, u2, state.t)


def from_characteristic(
    u1: ScalarField, u2: ScalarField, params: ModelParams, check_boundary: bool = True
) -> FlowState:
    if u1.grid != u2.grid or u1.t != u2.t:
        raise ValueError("characteristic fields must share grid and time")
    dv, u = params.right @ np.vstack([u1.values, u2.values])
    if np.any(dv <= -1.0):
        raise ValueError("reconstructed specific volume is not positive; perturbation too large")
    return FlowState(
        ScalarField(u1.grid, dv, u1.t),
        ScalarField(u1.grid, u, u1.t),
        check_boundary=check_boundary,
    )


def trapezoid(values: np.ndarray, dx: float) -> float:
    return float(np.trapezoid(values, dx=dx))


def masses(u1: ScalarField, u2: ScalarField, threshold: float = BOUNDARY_THRESHOLD) -> WaveMasses:
    """Masses ``M_i`` of the characteristic components by the trapezoidal rule."""
    for f in (u1, u2):
        if boundary_excess(f.values) > threshold:
            warnings.warn("characteristic data not decayed at the domain ends; mass truncated")
    dx = u1.grid.dx
    return WaveMasses(trapezoid(u1.values, dx), trapezoid(u2.values, dx))


def alpha_beta(n: int) -> tuple[Fraction, Fraction]:
    """Decay exponents ``alpha_n = 2 - 2^-(n+1)`` and ``beta_n = 3/2 - 2^-(n+1)``."""
    if n < -1:
        raise ValueError("exponent ladder starts at n = -1")
    h = Fraction(1, 2 ** (n + 1))
    return 2 - h, Fraction(3, 2) - h


def psi(n: int, x, t, lam: float):
    a = float(alpha_beta(n)[0])
    T = t + 1.0
    return ((x - lam * T) ** 2 + T) ** (-a / 2)


def psi_tilde(n: int, x, t, lam: float):
    a, b = (float(q) for q in alpha_beta(n))
    T = t + 1.0
    return 1.0 / (np.abs(x - lam * T) ** a + T ** b)


def Psi(i: int, n: int, x, t, params: ModelParams):
    """Pointwise envelope around both characteristics for family ``i``."""
    return psi(n, x, t, params.lam_i(i)) + psi_tilde(n, x, t, params.lam_i(3 - i))


def Theta(alpha: float, x, t, lam: float, mu: float):
    if not mu > 0:
        raise ValueError("Theta needs mu > 0")
    T = t + 1.0
    return T ** (-alpha / 2) * np.exp(-((x - lam * T) ** 2) / (mu * T))


def weights(kind: str, *args, **kwargs):
    """Dispatch to one of ``psi``, ``psi_tilde``, ``Psi`` or ``Theta`` by name."""
    table = {"psi": psi, "psi_tilde": psi_tilde, "Psi": Psi, "Theta": Theta}
    try:
        return table[kind](*args, **kwargs)
    except KeyError:
        raise ValueError(f"unknown weight {kind!r}") from None
