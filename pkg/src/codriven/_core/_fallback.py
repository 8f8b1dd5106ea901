"""Pure numpy implementations of the time-integration kernels.

Same signatures and results as the compiled module; the time loop runs in
Python and the batch dimension is vectorized, so these are competitive only
for large batches.
"""

import numpy as np


def _damping_force(v, c, cd, alpha):
    f = c * v
    if cd != 0.0:
        f = f + cd * np.sign(v) * np.abs(v) ** alpha
    return f


def sdof_rk4(ag_half, m, c, k, cd, alpha, h):
    ag_half = np.ascontiguousarray(ag_half, dtype=float)
    n = ag_half.shape[0]
    nsteps = (ag_half.shape[1] - 1) // 2
    out = np.zeros((n, nsteps + 1))
    u = np.zeros(n)
    v = np.zeros(n)
    inv_m = 1.0 / m
    for j in range(nsteps):
        a0 = ag_half[:, 2 * j]
        a1 = ag_half[:, 2 * j + 1]
        a2 = ag_half[:, 2 * j + 2]
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
        out[:, j + 1] = u
    return out


def _bw_explicit(z, dd, A, beta, gamma, nexp):
    az = np.abs(z)
    if nexp == 1.0:
        return z + A * dd - beta * np.abs(dd) * z - gamma * dd * az
    zp = az ** (nexp - 1.0)
    return z + A * dd - beta * np.abs(dd) * z * zp - gamma * dd * zp * az


def _bw_implicit(z0, dd, A, beta, gamma, nexp):
    r = z0 + A * dd
    if nexp == 1.0:
        sgn = np.where(r >= 0.0, 1.0, -1.0)
        return r / (1.0 + beta * np.abs(dd) + sgn * gamma * dd)
    z = z0.copy()
    for _ in range(60):
        az = np.abs(z)
        with np.errstate(divide="ignore", invalid="ignore"):
            zp = np.where(az > 0.0, az ** (nexp - 1.0), 0.0)
        f = z - r + beta * np.abs(dd) * z * zp + gamma * dd * zp * az
        fp = 1.0 + nexp * zp * (beta * np.abs(dd) + np.where(z >= 0.0, 1.0, -1.0) * gamma * dd)
        fp = np.where(fp <= 0.0, 1.0, fp)
        z = z - f / fp
        if np.all(np.abs(f) < 1e-16):
            break
    return z


def _drift(x):
    d = x.copy()
    d[:, 1:] -= x[:, :-1]
    return d


def boucwen_newmark(ag, mass, k, alpha, A, beta, gamma, nexp, c_diag, c_off,
                    dt, implicit, tol, maxiter):
    ag = np.ascontiguousarray(ag, dtype=float)
    mass, k, alpha = (np.asarray(a, dtype=float) for a in (mass, k, alpha))
    A, beta, gamma = (np.asarray(a, dtype=float) for a in (A, beta, gamma))
    c_diag, c_off = np.asarray(c_diag, dtype=float), np.asarray(c_off, dtype=float)
    ns, nt = ag.shape
    nd = mass.shape[0]
    a4, a5, a6 = 4.0 / dt**2, 4.0 / dt, 2.0 / dt

    ak = alpha * k
    kd = ak.copy()
    kd[:-1] += ak[1:]
    ko = -ak[1:]
    kd = kd + a6 * c_diag + a4 * mass
    ko = ko + a6 * c_off[: nd - 1]
    kh = (1.0 - alpha) * k
    den = np.empty(nd)
    cp = np.empty(max(nd - 1, 1))
    den[0] = kd[0]
    for i in range(1, nd):
        cp[i - 1] = ko[i - 1] / den[i - 1]
        den[i] = kd[i] - ko[i - 1] * cp[i - 1]

    x = np.zeros((ns, nd))
    v = np.zeros((ns, nd))
    acc = np.repeat(-ag[:, :1], nd, axis=1)
    z = np.zeros((ns, nd))
    peak = np.zeros((ns, nd))
    zpk = np.zeros((ns, nd))
    status = np.zeros(ns, dtype=np.int32)
    alive = np.ones(ns, dtype=bool)
    xn = np.empty((ns, nd))

    for t in range(1, nt):
        yv = a6 * x + v
        cy = c_diag * yv
        cy[:, 1:] += c_off[: nd - 1] * yv[:, :-1]
        cy[:, :-1] += c_off[: nd - 1] * yv[:, 1:]
        r = -mass * ag[:, t : t + 1] + mass * (a4 * x + a5 * v + acc) + cy
        zn = z
        zg = _bw_explicit(zn, _drift(v) * dt, A, beta, gamma, nexp)
        pending = alive.copy()
        for _ in range(maxiter):
            h = kh * zg
            rhs = r - h
            rhs[:, :-1] += h[:, 1:]
            xn[:, 0] = rhs[:, 0] / den[0]
            for i in range(1, nd):
                xn[:, i] = (rhs[:, i] - ko[i - 1] * xn[:, i - 1]) / den[i]
            for i in range(nd - 2, -1, -1):
                xn[:, i] -= cp[i] * xn[:, i + 1]
            if not implicit:
                break
            dd = _drift(a6 * (xn - x) - v) * dt
            znew = _bw_implicit(zn, dd, A, beta, gamma, nexp)
            with np.errstate(invalid="ignore"):
                err = np.max(np.abs(znew - zg), axis=1)
            zg = znew
            pending &= ~(err < tol)
            if not pending.any():
                break
        else:
            status[pending] = 1
            alive &= ~pending
        z = np.where(alive[:, None], zg, z)
        dd = xn - x
        acc = np.where(alive[:, None], a4 * dd - a5 * v - acc, acc)
        v = np.where(alive[:, None], a6 * dd - v, v)
        x = np.where(alive[:, None], xn, x)
        d = np.abs(_drift(x))
        nonfinite = alive & ~np.isfinite(d).all(axis=1)
        status[nonfinite] = 2
        peak = np.where(alive[:, None], np.maximum(peak, d), peak)
        zpk = np.where(alive[:, None], np.maximum(zpk, np.abs(z)), zpk)
        alive &= ~nonfinite
    return peak, zpk, status
