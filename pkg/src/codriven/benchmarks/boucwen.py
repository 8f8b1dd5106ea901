"""Six-storey shear building with Bouc-Wen hysteretic storeys.

Storey restoring force ``f_i = alpha_i k_i u_i + (1 - alpha_i) k_i z_i`` with
``z_i' = u_i' - (|u_i'| z_i |z_i|^(n-1) + u_i' |z_i|^n) / (2 x_yi^n)``.
The original model advances ``z`` by backward Euler, the surrogate by forward
Euler; the equation of motion is integrated by Newmark average acceleration
in both.  Rayleigh damping is fixed to a target ratio on the first and last
modes of the initial-stiffness system.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .. import _core
from ..errors import ModelEvaluationError
from ..models import ModelPair
from ..stochastic_input import ProcessSpec, synthesize_excitation

N_STOREYS = 6


def shear_stiffness(k):
    """Tridiagonal stiffness matrix of a shear building with storey stiffnesses ``k``."""
    k = np.asarray(k, dtype=float)
    n = k.size
    K = np.diag(k + np.append(k[1:], 0.0))
    off = -k[1:]
    K[np.arange(n - 1), np.arange(1, n)] = off
    K[np.arange(1, n), np.arange(n - 1)] = off
    return K


def rayleigh_coefficients(mass, k, zeta=0.05, modes=(0, -1)):
    """``(a0, a1)`` with ``C = a0 M + a1 K`` giving ratio ``zeta`` on two modes."""
    w2 = scipy.linalg.eigh(shear_stiffness(k), np.diag(mass), eigvals_only=True)
    wi, wj = np.sqrt(w2[modes[0]]), np.sqrt(w2[modes[1]])
    a0 = 2.0 * zeta * wi * wj / (wi + wj)
    a1 = 2.0 * zeta / (wi + wj)
    return a0, a1


class BoucWenPair(ModelPair):
    name = "boucwen"
    labels = tuple(f"alpha{i + 1}" for i in range(N_STOREYS)) + \
        tuple(f"k{i + 1}" for i in range(N_STOREYS)) + \
        tuple(f"xy{i + 1}" for i in range(N_STOREYS))

    def __init__(self, mass=8000.0, stiffness=1e7, alpha=0.1, x_yield=1.25e-3, nexp=1.0,
                 zeta=0.05, process=None, threshold=0.015, dt=0.005, tol=1e-10, maxiter=50,
                 bounds=None):
        n = N_STOREYS
        self.mass = np.full(n, float(mass))
        self.nominal = np.concatenate([np.full(n, alpha), np.full(n, stiffness),
                                       np.full(n, x_yield)]).astype(float)
        self.nexp = float(nexp)
        self.zeta = float(zeta)
        self.process = process or ProcessSpec(s0=8.5e-4)
        self.threshold = float(threshold)
        self.dt, self.tol, self.maxiter = float(dt), float(tol), int(maxiter)
        if bounds is None:
            bounds = [(0.01, 0.5)] * n + [(0.5e7, 2e7)] * n + [(0.5e-3, 5e-3)] * n
        super().__init__(self.process.n_vars, self.nominal, bounds)

    def _features(self, X):
        return synthesize_excitation(self.process, X, dt=self.dt)

    def simulate(self, ag, theta=None, implicit=True):
        """Peak storey drifts ``(N, 6)``, peak ``|z|`` and solver status per sample."""
        theta = self.nominal if theta is None else np.asarray(theta, dtype=float)
        n = N_STOREYS
        alpha, k, xy = theta[:n], theta[n:2 * n], theta[2 * n:]
        a0, a1 = rayleigh_coefficients(self.mass, k, self.zeta)
        C = a0 * np.diag(self.mass) + a1 * shear_stiffness(k)
        c_diag = np.ascontiguousarray(np.diag(C))
        c_off = np.append(np.diag(C, 1), 0.0)
        shape = 1.0 / (2.0 * xy ** self.nexp)
        return _core.boucwen_newmark(ag, self.mass, k, alpha, np.ones(n), shape, shape,
                                     self.nexp, c_diag, c_off, self.dt, implicit,
                                     self.tol, self.maxiter)

    def _response(self, F, theta, implicit):
        peak, _, status = self.simulate(F, theta, implicit)
        bad = np.flatnonzero(status)
        if bad.size:
            why = "did not converge" if status[bad[0]] == 1 else "diverged"
            raise ModelEvaluationError(f"Bouc-Wen integration {why} at index {bad[0]}",
                                       index=int(bad[0]))
        return self.threshold - peak.max(axis=1)

    def _original(self, X):
        return self._response(self._features(X), None, True)

    def _surrogate(self, F, theta):
        return self._response(F, theta, False)
