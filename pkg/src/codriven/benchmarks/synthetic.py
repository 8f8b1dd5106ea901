"""Cheap analytic pairs for tests and smoke runs."""

from __future__ import annotations

import numpy as np

from ..models import FunctionPair


def _projection(X):
    return X.sum(axis=1) / np.sqrt(X.shape[1])


def linear_pair(dim=10, beta=3.5):
    """Original ``beta - sum(x)/sqrt(n)``; surrogate ``theta - sum(x)/sqrt(n)``.

    The surrogate is exact up to a constant offset, so the failure
    probability ``Phi(-beta)`` is recovered after error correction.
    """
    return FunctionPair(
        dim,
        original=lambda X: beta - _projection(X),
        surrogate=lambda F, th: th[0] - F,
        theta_init=[beta - 1.0],
        theta_bounds=[(0.0, 10.0)],
        features=_projection,
        labels=("offset",),
        name="linear",
    )


def noisy_pair(dim=10, beta=3.5, noise=0.15):
    """Original with an input-dependent term the surrogate cannot see.

    ``y = beta - x1 + noise (1 + |x1|) x2``; the surrogate only sees ``x1``,
    so its error behaves like heteroscedastic noise in ``y_p``.
    """
    return FunctionPair(
        dim,
        original=lambda X: beta - X[:, 0] + noise * (1.0 + np.abs(X[:, 0])) * X[:, 1],
        surrogate=lambda F, th: th[1] * (th[0] - F),
        theta_init=[beta - 0.5, 1.0],
        theta_bounds=[(0.0, 10.0), (0.2, 5.0)],
        features=lambda X: X[:, 0],
        labels=("offset", "scale"),
        name="noisy",
    )
