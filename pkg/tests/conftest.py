import numpy as np
import pytest

from codriven.models import FunctionPair


class FunctionPredictor:
    """Stand-in for a trained predictor: ``mean`` is a plain limit-state function."""

    def __init__(self, f, dim, sigma=None):
        self.f, self.dim = f, dim
        self.sigma = sigma

    def mean(self, X):
        return self.f(X)

    def variant(self, name):
        return self.f

    def u_statistic(self, X):
        return np.abs(self.f(X)) / self.sigma

    def evaluate(self, X):
        from codriven.learner import PredictorEval
        y = self.f(X)
        return PredictorEval(y, np.zeros_like(y), np.full_like(y, self.sigma))


def threshold_pair(dim, beta_orig, beta_surr):
    """Original fails iff ``x1 >= beta_orig``; the surrogate uses ``beta_surr``."""
    pair = FunctionPair(dim, lambda X: beta_orig - X[:, 0],
                        lambda F, t: t[0] - F[:, 0], [beta_surr], [(-10.0, 10.0)])
    pred = FunctionPredictor(lambda X: beta_surr - X[:, 0], dim)
    return pair, pred


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance verdicts, printed once at the end of the session
VERDICTS = []


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(VERDICTS, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
