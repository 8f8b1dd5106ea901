import numpy as np
import pytest

from codriven.benchmarks import DamperPair
from codriven.calibrate import calibrate, pearson
from codriven.errors import CalibrationError, DegenerateCorrelationError
from codriven.models import FunctionPair, TrainingSet


def test_pearson_examples():
    assert pearson([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0)
    assert pearson([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)
    assert pearson([0, 1, 2], [0, 0, 3]) == pytest.approx(3 / np.sqrt(12), abs=1e-12)


def test_pearson_affine_invariance(rng):
    a, b = rng.standard_normal((2, 50))
    r = pearson(a, b)
    for alpha, beta in [(2.0, 5.0), (1e-3, -7.0), (-3.0, 1.0)]:
        assert abs(pearson(a, alpha * b + beta) - np.sign(alpha) * r) < 1e-12


def test_pearson_degenerate():
    with pytest.raises(DegenerateCorrelationError):
        pearson([1, 2, 3], [4, 4, 4])
    with pytest.raises(ValueError):
        pearson([1], [2])


def _quadratic_pair():
    # surrogate t0 - (x1 + t1)^2 ... only t1 = 0 reproduces the original ranking
    return FunctionPair(2, lambda X: 3.0 - X[:, 0] ** 2 - 0.5 * X[:, 1],
                        lambda F, t: t[0] - (F[:, 0] + t[1]) ** 2 - 0.5 * F[:, 1],
                        [1.0, 1.5], [(0.0, 5.0), (-2.0, 2.0)])


def test_exact_surrogate_reaches_unit_correlation(rng):
    pair = _quadratic_pair()
    X = rng.standard_normal((20, 2))
    D = TrainingSet(X, pair.eval_original_batch(X))
    calls = pair.original_calls
    res = calibrate(pair, D, seed=1)
    assert res.rho_star == pytest.approx(1.0, abs=1e-6)
    assert abs(res.theta_star[1]) < 1e-2
    assert pair.in_bounds(res.theta_star)
    assert pair.original_calls == calls  # surrogate-only
    assert res.n_surrogate_evals > 0 and len(res.trace) > 1


def test_affine_post_composition_leaves_rho_unchanged(rng):
    base = _quadratic_pair()
    scaled = FunctionPair(2, base._orig_fn, lambda F, t: 2.0 * base._surr_fn(F, t) + 5.0,
                          [1.0, 1.5], [(0.0, 5.0), (-2.0, 2.0)])
    X = rng.standard_normal((15, 2))
    D = TrainingSet(X, base.eval_original_batch(X))
    r1 = calibrate(base, D, seed=3).rho_star
    r2 = calibrate(scaled, D, seed=3).rho_star
    assert r1 == pytest.approx(r2, abs=1e-12)


def test_never_worse_than_warm_start(rng):
    pair = _quadratic_pair()
    X = rng.standard_normal((12, 2))
    D = TrainingSet(X, pair.eval_original_batch(X) + 0.3 * rng.standard_normal(12))
    theta0 = np.array([2.0, 0.7])
    r0 = pearson(D.y, pair.eval_surrogate_batch(X, theta0))
    res = calibrate(pair, D, theta0, restarts=1, maxiter=5)
    assert res.rho_star >= r0


def test_all_degenerate_raises(rng):
    pair = FunctionPair(1, lambda X: X[:, 0], lambda F, t: np.full(len(F), t[0]), [0.0], [(0, 1)])
    X = rng.standard_normal((5, 1))
    with pytest.raises(CalibrationError):
        calibrate(pair, TrainingSet(X, pair.eval_original_batch(X)))
    with pytest.raises(CalibrationError):
        calibrate(pair, TrainingSet(X[:2], X[:2, 0]))


def test_damper_calibration_high_correlation():
    pair = DamperPair()
    X = np.random.default_rng(4).standard_normal((30, pair.dim))
    D = TrainingSet(X, pair.eval_original_batch(X))
    res = calibrate(pair, D)
    assert res.rho_star >= 0.98
