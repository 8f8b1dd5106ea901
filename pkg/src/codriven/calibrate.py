"""Surrogate parameter calibration by correlation maximization.

The tunable surrogate parameters are chosen to maximize the sample Pearson
correlation between original and surrogate responses on the training set.
Only the rank-preserving behaviour matters here: any remaining bias or
scale error is absorbed by the error-correction model fitted afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

from .errors import CalibrationError, CodrivenError, DegenerateCorrelationError


def pearson(a, b):
    """Sample Pearson correlation of two equal-length vectors."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.shape != b.shape or a.size < 2:
        raise ValueError("pearson needs two vectors of equal length >= 2")
    da = a - a.mean()
    db = b - b.mean()
    na = np.sqrt(da @ da)
    nb = np.sqrt(db @ db)
    # relative tolerance so that round-off on a constant vector counts as zero
    if na <= 1e-13 * np.sqrt(a.size) * np.abs(a).max():
        raise DegenerateCorrelationError("first vector has zero variance")
    if nb <= 1e-13 * np.sqrt(b.size) * np.abs(b).max():
        raise DegenerateCorrelationError("second vector has zero variance")
    return float(np.clip((da / na) @ (db / nb), -1.0, 1.0))


@dataclass
class CalibrationResult:
    theta_star: np.ndarray
    rho_star: float
    n_surrogate_evals: int
    trace: list = field(default_factory=list)  # (theta, rho) per optimizer iteration


def calibrate(pair, D, theta_start=None, *, features=None, restarts=3, maxiter=200,
              ftol=1e-4, step=0.1, seed=0):
    """Maximize ``pearson(y, y_p(theta))`` over the training set ``D``.

    Bounded Nelder-Mead in coordinates normalized to the unit box (points
    are clipped onto the box), run from the warm start and from
    ``restarts - 1`` Latin-hypercube starts.  Candidates whose surrogate
    response is constant or fails to evaluate score ``-inf``.  The returned
    parameters are never worse than ``theta_start`` on ``D``.

    ``features`` may carry ``pair.features(D.x)`` to avoid recomputing the
    parameter-free part of the surrogate.
    """
    if len(D) < 3:
        raise CalibrationError("calibration needs at least 3 training points")
    theta_start = pair.theta_init if theta_start is None else np.asarray(theta_start, dtype=float)
    theta_start = pair.check_theta(theta_start)
    F = pair.features(D.x) if features is None else features
    y = D.y
    lo, hi = pair.theta_bounds.T
    width = np.where(hi > lo, hi - lo, 1.0)
    to_theta = lambda u: lo + np.clip(u, 0.0, 1.0) * width
    n_evals = 0
    memo = {}

    def rho_of(u):
        nonlocal n_evals
        key = tuple(np.clip(u, 0.0, 1.0))
        if key in memo:
            return memo[key]
        n_evals += 1
        try:
            r = pearson(y, pair.eval_surrogate_features(F, to_theta(u)))
        except (CodrivenError, FloatingPointError, ValueError):
            r = -np.inf
        memo[key] = r
        return r

    def _objective(u):
        # finite stand-in for degenerate points keeps the simplex arithmetic clean
        r = rho_of(u)
        return -r if np.isfinite(r) else 2.0

    u0 = (theta_start - lo) / width
    best_u, best_rho = u0.copy(), rho_of(u0)
    trace = [(theta_start.copy(), best_rho)]
    starts = [u0]
    if restarts > 1:
        starts += list(qmc.LatinHypercube(d=u0.size, seed=seed).random(restarts - 1))

    for start in starts:
        simplex = _initial_simplex(start, step)

        def record(intermediate_result):
            nonlocal best_u, best_rho
            u = np.clip(intermediate_result.x, 0.0, 1.0)
            r = rho_of(u)
            if r > best_rho:
                best_u, best_rho = u.copy(), r
            trace.append((to_theta(best_u), best_rho))

        res = minimize(_objective, start, method="Nelder-Mead",
                       bounds=list(zip(np.zeros(u0.size), np.ones(u0.size))),
                       callback=record,
                       options={"initial_simplex": simplex, "maxiter": maxiter,
                                "xatol": np.inf, "fatol": ftol})
        r = rho_of(res.x)
        if r > best_rho:
            best_u, best_rho = np.clip(res.x, 0.0, 1.0), r

    if not np.isfinite(best_rho):
        raise CalibrationError("every candidate parameter vector was degenerate")
    return CalibrationResult(to_theta(best_u), float(best_rho), n_evals, trace)


def _initial_simplex(u, step):
    d = u.size
    simplex = np.repeat(u[None, :], d + 1, axis=0)
    for i in range(d):
        # step inward when the start sits near the upper bound
        simplex[i + 1, i] += step if u[i] + step <= 1.0 else -step
    return simplex
