# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
# cython: language_level=3
"""Compiled inner loops of the time-marching solvers.

Every function here has a numpy twin in ``_kernels_py`` with the same
signature and semantics; ``kernels`` picks one at import.
"""

from libc.math cimport exp, erfc, fabs
from scipy.special.cython_special cimport erfcx

import numpy as np

# values below TINY are flushed to zero: Gaussian tails otherwise sink into
# subnormal numbers, which are an order of magnitude slower to operate on
cdef double TINY = 1e-150


def theta_profile(const double[::1] x, double shift, double K, double E, double pref,
                  double[::1] out):
    """out = pref * exp(-z^2) / (1 + E erfc(z)/2) with z = (x - shift) K."""
    cdef Py_ssize_t j, n = x.shape[0]
    cdef double z
    if E == 0.0:
        for j in range(n):
            out[j] = 0.0
        return
    for j in range(n):
        z = (x[j] - shift) * K
        if z > 0.0:
            if z > 26.6:
                out[j] = 0.0
            else:
                out[j] = pref / (exp(z * z) + 0.5 * E * erfcx(z))
        else:
            out[j] = pref * exp(-z * z) / (1.0 + 0.5 * E * erfc(z))
        if fabs(out[j]) < TINY:
            out[j] = 0.0


def conservative_rhs(const double[:, ::1] q, const double[:, ::1] th,
                     const double[::1] lam, const long[:, ::1] cpl_fam,
                     const long[:, ::1] cpl_field, const long[::1] src_fam,
                     double inv2dx, double[:, ::1] out):
    """out_f = -D0[ lam_f q_f + sum_k th[fam_k] q[field_k] + th[src]^2 / 2 ].

    ``D0`` is the central difference on interior nodes; the two end rows of
    ``out`` are zeroed.  ``cpl_fam``/``src_fam`` hold family indices 1, 2 or 0 (none).
    """
    cdef Py_ssize_t nf = q.shape[0], n = q.shape[1]
    cdef Py_ssize_t f, j, k, ncpl = cpl_fam.shape[1]
    cdef double la, fm, f0, fp
    cdef long fam, fld, sf
    for f in range(nf):
        la = lam[f]
        sf = src_fam[f]
        out[f, 0] = 0.0
        out[f, n - 1] = 0.0
        # rolling window of fluxes at j-1, j, j+1
        fm = _flux(q, th, f, 0, la, cpl_fam, cpl_field, ncpl, sf)
        f0 = _flux(q, th, f, 1, la, cpl_fam, cpl_field, ncpl, sf)
        for j in range(1, n - 1):
            fp = _flux(q, th, f, j + 1, la, cpl_fam, cpl_field, ncpl, sf)
            out[f, j] = -(fp - fm) * inv2dx
            fm = f0
            f0 = fp


cdef inline double _flux(const double[:, ::1] q, const double[:, ::1] th, Py_ssize_t f,
                         Py_ssize_t j, double la, const long[:, ::1] cpl_fam,
                         const long[:, ::1] cpl_field, Py_ssize_t ncpl, long sf) noexcept nogil:
    cdef double F = la * q[f, j]
    cdef Py_ssize_t k
    cdef long fam
    for k in range(ncpl):
        fam = cpl_fam[f, k]
        if fam > 0:
            F = F + th[fam - 1, j] * q[cpl_field[f, k], j]
    if sf > 0:
        F = F + 0.5 * th[sf - 1, j] * th[sf - 1, j]
    return F


def add_laplacian(const double[:, ::1] q, double coef, double[:, ::1] out):
    """out += coef * (q[j+1] - 2 q[j] + q[j-1]) on interior nodes."""
    cdef Py_ssize_t nf = q.shape[0], n = q.shape[1], f, j
    for f in range(nf):
        for j in range(1, n - 1):
            out[f, j] += coef * (q[f, j + 1] - 2.0 * q[f, j] + q[f, j - 1])


def tridiag_factor(const double[::1] lower, const double[::1] diag, const double[::1] upper):
    """Thomas factors (c', 1/m) of a tridiagonal matrix; lower[0], upper[-1] unused."""
    cdef Py_ssize_t j, m = diag.shape[0]
    cp_arr = np.empty(m)
    im_arr = np.empty(m)
    cdef double[::1] cp = cp_arr
    cdef double[::1] im = im_arr
    cdef double piv = diag[0]
    im[0] = 1.0 / piv
    cp[0] = upper[0] * im[0]
    for j in range(1, m):
        piv = diag[j] - lower[j] * cp[j - 1]
        im[j] = 1.0 / piv
        cp[j] = upper[j] * im[j] if j < m - 1 else 0.0
    return (np.ascontiguousarray(lower, dtype=np.float64), cp_arr, im_arr)


def tridiag_solve_factored(tuple factors, double[:, ::1] rhs):
    """Solve in place for every row of ``rhs`` (each row one right-hand side).

    The rows are swept together so their independent recurrences overlap.
    """
    cdef const double[::1] lower = factors[0]
    cdef const double[::1] cp = factors[1]
    cdef const double[::1] im = factors[2]
    cdef Py_ssize_t nr = rhs.shape[0], m = rhs.shape[1], r, j
    cdef double lj, ij, cj, v
    for r in range(nr):
        rhs[r, 0] = rhs[r, 0] * im[0]
    for j in range(1, m):
        lj = lower[j]
        ij = im[j]
        for r in range(nr):
            v = (rhs[r, j] - lj * rhs[r, j - 1]) * ij
            rhs[r, j] = v if fabs(v) >= TINY else 0.0
    for j in range(m - 2, -1, -1):
        cj = cp[j]
        for r in range(nr):
            v = rhs[r, j] - cj * rhs[r, j + 1]
            rhs[r, j] = v if fabs(v) >= TINY else 0.0


def viscous_faces(const double[::1] dv, double[::1] face):
    """face[j] = (1/v_j + 1/v_{j+1}) / 2, i.e. 1 / harmonic mean of v at j+1/2."""
    cdef Py_ssize_t j, n = dv.shape[0]
    for j in range(n - 1):
        face[j] = 0.5 * (1.0 / (1.0 + dv[j]) + 1.0 / (1.0 + dv[j + 1]))


def viscous_apply(const double[::1] u, const double[::1] face, double coef, double[::1] out):
    """out[j] = coef * (face[j] (u[j+1]-u[j]) - face[j-1] (u[j]-u[j-1])) on interior nodes."""
    cdef Py_ssize_t j, n = u.shape[0]
    out[0] = 0.0
    out[n - 1] = 0.0
    for j in range(1, n - 1):
        out[j] = coef * (face[j] * (u[j + 1] - u[j]) - face[j - 1] * (u[j] - u[j - 1]))


def central_diff(const double[::1] f, double inv2dx, double[::1] out):
    """out[j] = (f[j+1] - f[j-1]) / (2 dx) on interior nodes, zero at the ends."""
    cdef Py_ssize_t j, n = f.shape[0]
    out[0] = 0.0
    out[n - 1] = 0.0
    for j in range(1, n - 1):
        out[j] = (f[j + 1] - f[j - 1]) * inv2dx
