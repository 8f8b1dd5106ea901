"""Original/surrogate model pairs sharing one standard normal input space.

A pair couples an expensive original model ``M(x)`` with a cheap parametric
surrogate written as a composition ``M_p(psi(x); theta)``: ``psi`` is a
filtering or coarse-graining map that does not depend on the tunable
parameters, so its output can be cached across parameter sweeps.  Failure is
``y <= 0`` for both models.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidDimensionError, ModelEvaluationError, ParameterError


class ModelPair:
    """Base class for an original model and its parametric surrogate.

    Subclasses implement ``_original``, ``_features`` and ``_surrogate``; all
    three operate on batches (rows are points).  Use the module-level
    ``eval_original_batch`` / ``eval_surrogate_batch`` (or the methods of the
    same name) which add validation and call counting.
    """

    name = "pair"
    labels: tuple = ()

    def __init__(self, dim, theta_init, theta_bounds):
        self.dim = int(dim)
        self.theta_init = np.asarray(theta_init, dtype=float).copy()
        self.theta_bounds = np.asarray(theta_bounds, dtype=float).reshape(-1, 2).copy()
        if self.theta_init.shape[0] != self.theta_bounds.shape[0]:
            raise ParameterError("theta_init and theta_bounds disagree in length")
        if not self.in_bounds(self.theta_init):
            raise ParameterError(f"initial parameters {self.theta_init} outside bounds")
        self._calls = 0
        self._lock = threading.Lock()

    # -- call accounting ---------------------------------------------------

    @property
    def original_calls(self):
        return self._calls

    def reset_calls(self):
        with self._lock:
            self._calls = 0

    def _count(self, n):
        with self._lock:
            self._calls += n

    # -- parameters ----------------------------------------------------------

    def in_bounds(self, theta, rtol=1e-12):
        theta = np.asarray(theta, dtype=float)
        lo, hi = self.theta_bounds.T
        slack = rtol * np.maximum(np.abs(lo), np.abs(hi))
        return bool(np.all(theta >= lo - slack) and np.all(theta <= hi + slack))

    def check_theta(self, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.shape != self.theta_init.shape:
            raise ParameterError(f"expected {self.theta_init.size} parameters, got {theta.size}")
        if not self.in_bounds(theta):
            raise ParameterError(f"parameters {theta} outside bounds")
        return np.clip(theta, *self.theta_bounds.T)

    # -- evaluation ----------------------------------------------------------

    def _as_batch(self, xs):
        X = np.asarray(xs, dtype=float)
        if X.ndim == 1:
            X = X[None, :] if X.size else X.reshape(0, self.dim)
        if X.shape[1] != self.dim:
            raise InvalidDimensionError(f"expected dimension {self.dim}, got {X.shape[1]}")
        return X

    def admissible(self, xs):
        """Inputs the original model can represent physically (all, by default)."""
        return np.ones(self._as_batch(xs).shape[0], dtype=bool)

    def eval_original_batch(self, xs):
        X = self._as_batch(xs)
        if X.shape[0] == 0:
            return np.empty(0)
        self._count(X.shape[0])
        y = np.asarray(self._original(X), dtype=float)
        _check_finite(y, "original model")
        return y

    def features(self, xs):
        X = self._as_batch(xs)
        if X.shape[0] == 0:
            return self._features(np.zeros((1, self.dim)))[:0]
        return self._features(X)

    def eval_surrogate_features(self, F, theta, errors="raise"):
        """Surrogate responses from precomputed features.

        With ``errors="mask"`` rows whose evaluation fails come back as NaN
        instead of aborting the whole batch.
        """
        theta = self.check_theta(theta)
        if len(F) == 0:
            return np.empty(0)
        if errors == "mask":
            return self._surrogate_masked(F, theta)
        y = np.asarray(self._surrogate(F, theta), dtype=float)
        _check_finite(y, "surrogate model")
        return y

    def _surrogate_masked(self, F, theta):
        try:
            y = np.asarray(self._surrogate(F, theta), dtype=float)
        except (ModelEvaluationError, FloatingPointError):
            y = np.empty(len(F))
            for i in range(len(F)):
                try:
                    y[i] = np.asarray(self._surrogate(F[i:i + 1], theta), dtype=float)[0]
                except (ModelEvaluationError, FloatingPointError):
                    y[i] = np.nan
        return np.where(np.isfinite(y), y, np.nan)

    def eval_surrogate_batch(self, xs, theta):
        theta = self.check_theta(theta)
        return self.eval_surrogate_features(self.features(xs), theta)

    def _original(self, X):
        raise NotImplementedError

    def _features(self, X):
        return X

    def _surrogate(self, F, theta):
        raise NotImplementedError


def _check_finite(y, what):
    bad = np.flatnonzero(~np.isfinite(y))
    if bad.size:
        raise ModelEvaluationError(f"{what} returned a non-finite value at index {bad[0]}", index=int(bad[0]))


def eval_original_batch(pair, xs):
    """Original-model responses for a batch of points (order preserving, counted)."""
    return pair.eval_original_batch(xs)


def eval_surrogate_batch(pair, xs, theta):
    """Surrogate responses ``M_p(psi(x); theta)`` for a batch of points."""
    return pair.eval_surrogate_batch(xs, theta)


class FunctionPair(ModelPair):
    """Pair assembled from plain callables; handy for synthetic problems.

    ``original(X)`` and ``surrogate(F, theta)`` take batches; ``features``
    defaults to the identity.
    """

    def __init__(self, dim, original, surrogate, theta_init, theta_bounds,
                 features=None, labels=None, name="synthetic"):
        self._orig_fn = original
        self._surr_fn = surrogate
        self._feat_fn = features
        self.name = name
        if labels is not None:
            self.labels = tuple(labels)
        else:
            self.labels = tuple(f"theta{i}" for i in range(len(np.atleast_1d(theta_init))))
        super().__init__(dim, np.atleast_1d(theta_init), theta_bounds)

    def _original(self, X):
        return self._orig_fn(X)

    def _features(self, X):
        return X if self._feat_fn is None else self._feat_fn(X)

    def _surrogate(self, F, theta):
        return self._surr_fn(F, theta)


@dataclass
class TrainingSet:
    """Inputs evaluated through the original model."""

    x: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    y: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        self.x = np.atleast_2d(np.asarray(self.x, dtype=float))
        self.y = np.asarray(self.y, dtype=float).ravel()
        if self.x.shape[0] != self.y.shape[0]:
            raise InvalidDimensionError("x and y must have the same number of rows")

    def __len__(self):
        return self.y.shape[0]

    def contains(self, x, atol=0.0):
        if len(self) == 0:
            return False
        return bool(np.any(np.all(np.abs(self.x - np.asarray(x)) <= atol, axis=1)))

    def add(self, x, y):
        x = np.asarray(x, dtype=float).reshape(1, -1)
        if self.contains(x[0]):
            raise ValueError("duplicate training input")
        return TrainingSet(np.vstack([self.x, x]), np.append(self.y, float(y)))
