"""Pure-numpy versions of the compiled kernels (same signatures, in-place outputs)."""

import numpy as np
from scipy.linalg import solve_banded
from scipy.special import erfc, erfcx

TINY = 1e-150  # flushed to zero, as in the compiled kernels


def _flush(a):
    a[np.abs(a) < TINY] = 0.0


def theta_profile(x, shift, K, E, pref, out):
    if E == 0.0:
        out[:] = 0.0
        return
    z = (x - shift) * K
    pos = z > 0
    zp = z[pos]
    with np.errstate(over="ignore"):
        out[pos] = pref / (np.exp(zp * zp) + 0.5 * E * erfcx(zp))
    zn = z[~pos]
    out[~pos] = pref * np.exp(-zn * zn) / (1.0 + 0.5 * E * erfc(zn))
    _flush(out)


def conservative_rhs(q, th, lam, cpl_fam, cpl_field, src_fam, inv2dx, out):
    F = lam[:, None] * q
    for f in range(q.shape[0]):
        for fam, fld in zip(cpl_fam[f], cpl_field[f]):
            if fam > 0:
                F[f] += th[fam - 1] * q[fld]
        if src_fam[f] > 0:
            F[f] += 0.5 * th[src_fam[f] - 1] ** 2
    out[:, 1:-1] = -(F[:, 2:] - F[:, :-2]) * inv2dx
    out[:, 0] = 0.0
    out[:, -1] = 0.0


def add_laplacian(q, coef, out):
    out[:, 1:-1] += coef * (q[:, 2:] - 2.0 * q[:, 1:-1] + q[:, :-2])


def tridiag_factor(lower, diag, upper):
    # banded storage is kept; solve_banded refactors per call
    ab = np.zeros((3, len(diag)))
    ab[0, 1:] = upper[:-1]
    ab[1] = diag
    ab[2, :-1] = lower[1:]
    return ab


def tridiag_solve_factored(factors, rhs):
    rhs[:] = solve_banded((1, 1), factors, rhs.T, check_finite=False).T
    _flush(rhs)


def viscous_faces(dv, face):
    iv = 1.0 / (1.0 + dv)
    face[:] = 0.5 * (iv[1:] + iv[:-1])


def viscous_apply(u, face, coef, out):
    fl = face * (u[1:] - u[:-1])
    out[1:-1] = coef * (fl[1:] - fl[:-1])
    out[0] = 0.0
    out[-1] = 0.0


def central_diff(f, inv2dx, out):
    out[1:-1] = (f[2:] - f[:-2]) * inv2dx
    out[0] = 0.0
    out[-1] = 0.0
