"""SDOF oscillator with a nonlinear viscous damper under white noise.

The surrogate replaces the damper by an equivalent linear dashpot ``c_e``.
Both equations are integrated with classical RK4 at ``dt = 0.005 s``; the
excitation is synthesized on the half-step grid for the intermediate stages.
"""

from __future__ import annotations

import numpy as np
from scipy.special import gamma as gamma_fn

from .. import _core
from ..errors import ParameterError
from ..models import ModelPair
from ..stochastic_input import ProcessSpec, synthesize_excitation


def statistical_linearization(m, c, cd, alpha, s0, tol=1e-10, max_iter=200):
    """Equivalent damping coefficient from stationary Gaussian linearization.

    Minimizing the mean-square error of ``cd sgn(v)|v|^alpha ~ c_e v`` for a
    zero-mean Gaussian velocity gives ``c_e = cd E|v|^(1+alpha) / E[v^2]``,
    and the stationary velocity variance of the linear oscillator under
    two-sided white noise ``s0`` is ``pi s0 m / (c + c_e)``.  Solved by
    fixed-point iteration.
    """
    kappa = 2.0 ** ((1.0 + alpha) / 2.0) * gamma_fn(1.0 + alpha / 2.0) / np.sqrt(np.pi)
    ce = cd
    for _ in range(max_iter):
        sigma_v = np.sqrt(np.pi * s0 * m / (c + ce))
        new = cd * kappa * sigma_v ** (alpha - 1.0)
        if abs(new - ce) <= tol * max(1.0, abs(new)):
            return float(new)
        ce = new
    return float(ce)


class DamperPair(ModelPair):
    name = "damper"
    labels = ("c_e",)

    def __init__(self, mass=3000.0, damping=3000.0, stiffness=3e5, cd=800.0, alpha=0.3,
                 process=None, threshold=0.06, dt=0.005, bounds=((0.0, 2e4),), theta_init=None):
        self.mass, self.damping, self.stiffness = float(mass), float(damping), float(stiffness)
        self.cd, self.alpha = float(cd), float(alpha)
        self.process = process or ProcessSpec()
        self.threshold = float(threshold)
        self.dt = float(dt)
        if theta_init is None:
            theta_init = (statistical_linearization(self.mass, self.damping, self.cd,
                                                    self.alpha, self.process.s0),)
        super().__init__(self.process.n_vars, theta_init, bounds)

    def _features(self, X):
        return synthesize_excitation(self.process, X, dt=self.dt / 2.0)

    def displacement(self, ag_half, c_total=None, cd=None):
        c = self.damping if c_total is None else c_total
        cd = self.cd if cd is None else cd
        return _core.sdof_rk4(ag_half, self.mass, c, self.stiffness, cd, self.alpha, self.dt)

    def _original(self, X):
        u = self.displacement(self._features(X))
        return self.threshold - np.abs(u).max(axis=1)

    def _surrogate(self, F, theta):
        c_total = self.damping + theta[0]
        if not c_total > 0.0:
            raise ParameterError("total damping must be positive")
        u = self.displacement(F, c_total=c_total, cd=0.0)
        return self.threshold - np.abs(u).max(axis=1)
