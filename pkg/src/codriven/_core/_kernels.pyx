# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled time-integration kernels.

Both kernels loop over a batch of independent excitations; one row of the
input array is one sample.  Semantics match ``codriven._core._fallback``.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, pow, isfinite

cnp.import_array()

cdef enum:
    MAXDOF = 64


cdef inline double _damping_force(double v, double c, double cd, double alpha) noexcept nogil:
    cdef double f = c * v
    if cd != 0.0 and v != 0.0:
        if v > 0.0:
            f += cd * pow(v, alpha)
        else:
            f -= cd * pow(-v, alpha)
    return f


def sdof_rk4(double[:, ::1] ag_half, double m, double c, double k,
             double cd, double alpha, double h):
    """Displacement history of ``m u'' + c u' + k u + cd sgn(u')|u'|^alpha = -m ag``.

    ``ag_half`` holds the excitation on a grid of spacing ``h / 2``; the
    returned history is on the grid of spacing ``h``.
    """
    cdef Py_ssize_t n = ag_half.shape[0]
    cdef Py_ssize_t nsteps = (ag_half.shape[1] - 1) // 2
    out = np.zeros((n, nsteps + 1))
    cdef double[:, ::1] u_out = out
    cdef Py_ssize_t s, j
    cdef double u, v, a0, a1, a2, inv_m = 1.0 / m
    cdef double k1u, k1v, k2u, k2v, k3u, k3v, k4u, k4v, ut, vt
    with nogil:
        for s in range(n):
            u = 0.0
            v = 0.0
            for j in range(nsteps):
                a0 = ag_half[s, 2 * j]
                a1 = ag_half[s, 2 * j + 1]
                a2 = ag_half[s, 2 * j + 2]
                k1u = v
                k1v = -a0 - (_damping_force(v, c, cd, alpha) + k * u) * inv_m
                ut = u + 0.5 * h * k1u
                vt = v + 0.5 * h * k1v
                k2u = vt
                k2v = -a1 - (_damping_force(vt, c, cd, alpha) + k * ut) * inv_m
                ut = u + 0.5 * h * k2u
                vt = v + 0.5 * h * k2v
                k3u = vt
                k3v = -a1 - (_damping_force(vt, c, cd, alpha) + k * ut) * inv_m
                ut = u + h * k3u
                vt = v + h * k3v
                k4u = vt
                k4v = -a2 - (_damping_force(vt, c, cd, alpha) + k * ut) * inv_m
                u = u + h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u)
                v = v + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
                u_out[s, j + 1] = u
    return out


cdef inline double _bw_explicit(double z, double dd, double A, double beta,
                                double gamma, double nexp) noexcept nogil:
    cdef double az = fabs(z)
    cdef double zp
    if nexp == 1.0:
        return z + A * dd - beta * fabs(dd) * z - gamma * dd * az
    zp = pow(az, nexp - 1.0)
    return z + A * dd - beta * fabs(dd) * z * zp - gamma * dd * zp * az


cdef inline double _bw_implicit(double z0, double dd, double A, double beta,
                                double gamma, double nexp) noexcept nogil:
    # root of  z - z0 - A dd + beta |dd| z |z|^(n-1) + gamma dd |z|^n = 0
    cdef double r = z0 + A * dd
    cdef double z, az, zp, f, fp
    cdef int it
    if nexp == 1.0:
        if r >= 0.0:
            return r / (1.0 + beta * fabs(dd) + gamma * dd)
        return r / (1.0 + beta * fabs(dd) - gamma * dd)
    z = z0
    for it in range(60):
        az = fabs(z)
        zp = pow(az, nexp - 1.0) if az > 0.0 else 0.0
        f = z - r + beta * fabs(dd) * z * zp + gamma * dd * zp * az
        fp = 1.0 + nexp * zp * (beta * fabs(dd) + (gamma * dd if z >= 0.0 else -gamma * dd))
        if fp <= 0.0:
            fp = 1.0
        z -= f / fp
        if fabs(f) < 1e-16:
            break
    return z


def boucwen_newmark(double[:, ::1] ag, double[::1] mass, double[::1] k,
                    double[::1] alpha, double[::1] A, double[::1] beta,
                    double[::1] gamma, double nexp,
                    double[::1] c_diag, double[::1] c_off, double dt,
                    bint implicit, double tol, int maxiter):
    """Shear building with Bouc-Wen storeys, Newmark average acceleration host.

    The hysteretic states advance by forward Euler (``implicit=False``, using
    the drift velocity at the start of the step) or backward Euler (using the
    end-of-step velocity, coupled to equilibrium by fixed-point iteration).
    Returns ``(peak_drift, z_peak, status)``; ``status`` is 0 on success,
    1 when the implicit iteration does not converge and 2 on a non-finite
    state.
    """
    cdef Py_ssize_t ns = ag.shape[0]
    cdef Py_ssize_t nt = ag.shape[1]
    cdef Py_ssize_t nd = mass.shape[0]
    if nd > MAXDOF:
        raise ValueError("too many degrees of freedom")
    peak = np.zeros((ns, nd))
    zpk = np.zeros((ns, nd))
    stat = np.zeros(ns, dtype=np.int32)
    cdef double[:, ::1] peak_v = peak
    cdef double[:, ::1] zpk_v = zpk
    cdef int[::1] stat_v = stat

    cdef double a4 = 4.0 / (dt * dt), a5 = 4.0 / dt, a6 = 2.0 / dt
    cdef double kd[MAXDOF]
    cdef double ko[MAXDOF]
    cdef double cp[MAXDOF]
    cdef double den[MAXDOF]
    cdef double kh[MAXDOF]
    cdef double x[MAXDOF]
    cdef double v[MAXDOF]
    cdef double acc[MAXDOF]
    cdef double z[MAXDOF]
    cdef double zg[MAXDOF]
    cdef double zn[MAXDOF]
    cdef double xn[MAXDOF]
    cdef double r[MAXDOF]
    cdef double rhs[MAXDOF]
    cdef double y[MAXDOF]
    cdef Py_ssize_t i, s, t
    cdef int it, bad
    cdef double err, dd, h_i, h_next, cy, d_new, ak

    # effective stiffness (tridiagonal) and its Thomas factorization
    for i in range(nd):
        ak = alpha[i] * k[i]
        kd[i] = ak + (alpha[i + 1] * k[i + 1] if i + 1 < nd else 0.0)
        ko[i] = -alpha[i + 1] * k[i + 1] if i + 1 < nd else 0.0
        kd[i] += a6 * c_diag[i] + a4 * mass[i]
        ko[i] += a6 * c_off[i] if i + 1 < nd else 0.0
        kh[i] = (1.0 - alpha[i]) * k[i]
    den[0] = kd[0]
    for i in range(1, nd):
        cp[i - 1] = ko[i - 1] / den[i - 1]
        den[i] = kd[i] - ko[i - 1] * cp[i - 1]

    with nogil:
        for s in range(ns):
            for i in range(nd):
                x[i] = 0.0
                v[i] = 0.0
                acc[i] = -ag[s, 0]
                z[i] = 0.0
            bad = 0
            for t in range(1, nt):
                # r = p + M(a4 x + a5 v + a) + C(a6 x + v)
                for i in range(nd):
                    y[i] = a6 * x[i] + v[i]
                for i in range(nd):
                    cy = c_diag[i] * y[i]
                    if i > 0:
                        cy += c_off[i - 1] * y[i - 1]
                    if i + 1 < nd:
                        cy += c_off[i] * y[i + 1]
                    r[i] = -mass[i] * ag[s, t] + mass[i] * (a4 * x[i] + a5 * v[i] + acc[i]) + cy
                    zn[i] = z[i]
                # forward Euler with the start-of-step drift velocity (also
                # the predictor of the implicit iteration)
                for i in range(nd):
                    dd = (v[i] - (v[i - 1] if i > 0 else 0.0)) * dt
                    zg[i] = _bw_explicit(zn[i], dd, A[i], beta[i], gamma[i], nexp)
                it = 0
                while True:
                    for i in range(nd):
                        h_i = kh[i] * zg[i]
                        h_next = kh[i + 1] * zg[i + 1] if i + 1 < nd else 0.0
                        rhs[i] = r[i] - (h_i - h_next)
                    # Thomas solve
                    xn[0] = rhs[0] / den[0]
                    for i in range(1, nd):
                        xn[i] = (rhs[i] - ko[i - 1] * xn[i - 1]) / den[i]
                    for i in range(nd - 2, -1, -1):
                        xn[i] -= cp[i] * xn[i + 1]
                    if not implicit:
                        break
                    # backward Euler on z with the end-of-step drift velocity
                    err = 0.0
                    for i in range(nd):
                        y[i] = a6 * (xn[i] - x[i]) - v[i]
                    for i in range(nd):
                        dd = (y[i] - (y[i - 1] if i > 0 else 0.0)) * dt
                        h_i = _bw_implicit(zn[i], dd, A[i], beta[i], gamma[i], nexp)
                        if fabs(h_i - zg[i]) > err:
                            err = fabs(h_i - zg[i])
                        zg[i] = h_i
                    it += 1
                    if err < tol:
                        break
                    if it >= maxiter or not isfinite(err):
                        bad = 1
                        break
                if bad:
                    break
                for i in range(nd):
                    z[i] = zg[i]
                    dd = xn[i] - x[i]
                    acc[i] = a4 * dd - a5 * v[i] - acc[i]
                    v[i] = a6 * dd - v[i]
                    x[i] = xn[i]
                for i in range(nd):
                    d_new = x[i] - (x[i - 1] if i > 0 else 0.0)
                    if not isfinite(d_new):
                        bad = 2
                    if fabs(d_new) > peak_v[s, i]:
                        peak_v[s, i] = fabs(d_new)
                    if fabs(z[i]) > zpk_v[s, i]:
                        zpk_v[s, i] = fabs(z[i])
                if bad:
                    break
            stat_v[s] = bad
    return peak, zpk, stat
