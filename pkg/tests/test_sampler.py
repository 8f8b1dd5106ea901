import numpy as np
import pytest
from scipy.stats import norm

from codriven.errors import LevelOverflowError
from codriven.sampler import SmcConfig, estimate_probability, mcmc_conditional, sample_critical_region
from codriven.stochastic_input import stream
from conftest import FunctionPredictor


def test_half_space_at_origin():
    res = estimate_probability(lambda X: -X[:, 0], 2, SmcConfig(seed=1))
    assert res.p_hat == pytest.approx(0.5, abs=0.05)
    assert res.levels == [0.0]


def test_three_sigma_half_space():
    p = [estimate_probability(lambda X: 3.0 - X[:, 0], 5, SmcConfig(seed=s)).p_hat
         for s in range(5)]
    assert np.mean(p) == pytest.approx(norm.cdf(-3), rel=0.25)


def test_high_dimensional_rare_event():
    # 1000-dimensional linear limit state with reliability index 4.5
    a = np.ones(1000) / np.sqrt(1000)
    res = estimate_probability(lambda X: 4.5 - X @ a, 1000, SmcConfig(seed=2))
    target = norm.cdf(-4.5)
    assert abs(np.log10(res.p_hat / target)) < 0.5
    assert 0 < res.cov < 0.6
    assert len(res.levels) >= 5


def test_reproducible_and_seed_dependent():
    g = lambda X: 2.5 - X[:, 0] - 0.3 * X[:, 1] ** 2
    a = estimate_probability(g, 3, SmcConfig(seed=7))
    b = estimate_probability(g, 3, SmcConfig(seed=7))
    c = estimate_probability(g, 3, SmcConfig(seed=8))
    assert a.p_hat == b.p_hat and a.levels == b.levels
    assert a.p_hat != c.p_hat


def test_levels_strictly_decreasing_and_nested():
    res = estimate_probability(lambda X: 4.0 - X[:, 0], 4, SmcConfig(seed=3))
    assert np.all(np.diff(res.levels) < 0) and res.levels[-1] == 0.0
    assert np.all(res.terminal_values <= 0)
    assert res.p_hat <= SmcConfig().p0 ** (len(res.levels) - 1)


def test_level_overflow():
    with pytest.raises(LevelOverflowError):
        estimate_probability(lambda X: 9.0 - X[:, 0], 2, SmcConfig(max_levels=3))


def test_invalid_config():
    with pytest.raises(ValueError):
        SmcConfig(p0=0.7)
    with pytest.raises(ValueError):
        SmcConfig(n_per_level=50, p0=0.1)


def test_conditional_chain_moments():
    # N(0,1) restricted to x1 >= 1: mean phi(1)/(1 - Phi(1))
    ind = lambda X: X[:, 0] >= 1.0
    seeds = np.column_stack([np.full(50, 1.5), np.zeros(50)])
    xs, rate, used = mcmc_conditional(ind, seeds, 200, SmcConfig(), rng=stream(5, 0), burn_in=50)
    assert xs.shape == (200 * 50, 2)
    assert np.all(xs[:, 0] >= 1.0)
    assert xs[:, 0].mean() == pytest.approx(norm.pdf(1) / norm.sf(1), abs=0.03)
    assert xs[:, 1].var() == pytest.approx(1.0, abs=0.1)
    assert 0.1 < rate < 0.9


def test_conditional_rejects_outside_seeds():
    with pytest.raises(ValueError):
        mcmc_conditional(lambda X: X[:, 0] > 0, np.array([[-1.0]]), 5)


def test_slab_critical_region():
    pred = FunctionPredictor(lambda X: 4.0 - X[:, 0], 3, sigma=0.5)
    reg = sample_critical_region(pred, 2.0, 500, SmcConfig(seed=4))
    assert reg.x.shape == (500, 3)
    assert np.all(reg.u <= 2.0)
    assert np.all(np.abs(reg.x[:, 0] - 4.0) <= 1.0 + 1e-12)
    exact = norm.cdf(5.0) - norm.cdf(3.0)
    assert abs(np.log(reg.p_region / exact)) < 0.4


def test_huge_delta_returns_prior_samples():
    pred = FunctionPredictor(lambda X: 4.0 - X[:, 0], 2, sigma=1.0)
    reg = sample_critical_region(pred, 1e6, 1000, SmcConfig(seed=6))
    assert reg.p_region == 1.0
    assert reg.x[:, 0].mean() == pytest.approx(0.0, abs=0.15)
