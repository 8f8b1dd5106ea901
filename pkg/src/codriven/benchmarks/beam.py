"""Cantilever beam with a random Young's modulus field.

Original model: 50 x 20 Q4 plane-stress mesh with one modulus per element.
Surrogate: one Q4 element spanning the whole beam with homogenized modulus
``E_p = a_E * mean(E) + b_E``.  Response ``y = threshold - d_A`` with ``d_A``
the downward deflection of the lower-right corner.
"""

from __future__ import annotations

from functools import cached_property

import numpy as np

from ..errors import ModelEvaluationError
from ..models import ModelPair
from ..stochastic_input import RandomFieldSpec, field_factor, realize_field
from .fem import CantileverMesh


class BeamPair(ModelPair):
    name = "beam"
    labels = ("a_E", "b_E")

    def __init__(self, field=None, thickness=1.0, threshold=0.0032, nu=0.3,
                 n_loads=20, load=500e3,
                 bounds=((0.2, 5.0), (-100e9, 100e9)), theta_init=(1.0, 0.0)):
        self.field = field or RandomFieldSpec()
        self.threshold = float(threshold)
        f = self.field
        self.mesh = CantileverMesh(f.nx, f.ny, f.lx, f.ly, nu, thickness, n_loads, load)
        self.coarse = CantileverMesh(1, 1, f.lx, f.ly, nu, thickness, n_loads, load)
        super().__init__(f.n, theta_init, bounds)

    @cached_property
    def factor(self):
        return field_factor(self.field)

    @cached_property
    def _average_weights(self):
        return self.factor.mean(axis=0)

    @cached_property
    def coarse_compliance(self):
        """Single-element corner deflection times modulus (deflection at E = 1)."""
        return self.coarse.tip_deflection(np.array([1.0]))

    def field_values(self, X):
        return realize_field(self.field, self.factor, X)

    def admissible(self, xs):
        """Field realizations with strictly positive modulus in every cell."""
        return np.all(self.field_values(self._as_batch(xs)) > 0.0, axis=1)

    def _original(self, X):
        E = self.field_values(X)
        out = np.empty(X.shape[0])
        for i, row in enumerate(E):
            try:
                out[i] = self.threshold - self.mesh.tip_deflection(row)
            except ModelEvaluationError as exc:
                raise ModelEvaluationError(f"beam FEM failed at index {i}: {exc}", index=i) from exc
        return out

    def _features(self, X):
        # mean of the physical field values, linear in x
        return self.field.mean + self.field.std * (X @ self._average_weights)

    def _surrogate(self, F, theta):
        a_e, b_e = theta
        E_p = a_e * np.asarray(F, dtype=float) + b_e
        bad = np.flatnonzero(E_p <= 0.0)
        if bad.size:
            raise ModelEvaluationError(
                f"homogenized modulus non-positive at index {bad[0]}", index=int(bad[0]))
        return self.threshold - self.coarse_compliance / E_p
