import numpy as np
import pytest

from codriven.benchmarks import BeamPair, get_problem, linear_pair
from codriven.errors import InvalidDimensionError, ModelEvaluationError, ParameterError
from codriven.models import FunctionPair, TrainingSet, eval_original_batch, eval_surrogate_batch


@pytest.fixture
def pair():
    return FunctionPair(3, lambda X: 1.0 - X.sum(axis=1), lambda F, t: t[0] - t[1] * F[:, 0],
                        [1.0, 1.0], [(0, 2), (0.1, 3)])


def test_empty_batches(pair):
    assert eval_original_batch(pair, np.zeros((0, 3))).shape == (0,)
    assert eval_surrogate_batch(pair, np.zeros((0, 3)), [1.0, 1.0]).shape == (0,)
    assert pair.original_calls == 0


def test_batches_preserve_order(pair, rng):
    X = rng.standard_normal((8, 3))
    perm = rng.permutation(8)
    y = eval_original_batch(pair, X)
    np.testing.assert_array_equal(eval_original_batch(pair, X[perm]), y[perm])
    yp = eval_surrogate_batch(pair, X, [1.0, 2.0])
    np.testing.assert_array_equal(eval_surrogate_batch(pair, X[perm], [1.0, 2.0]), yp[perm])


def test_batch_equals_map_of_singles(pair, rng):
    X = rng.standard_normal((5, 3))
    singles = [eval_original_batch(pair, x)[0] for x in X]
    np.testing.assert_array_equal(eval_original_batch(pair, X), singles)


def test_call_counter(pair, rng):
    pair.eval_original_batch(rng.standard_normal((4, 3)))
    pair.eval_surrogate_batch(rng.standard_normal((4, 3)), [1.0, 1.0])
    assert pair.original_calls == 4
    pair.reset_calls()
    assert pair.original_calls == 0


def test_surrogate_out_of_bounds(pair):
    with pytest.raises(ParameterError):
        pair.eval_surrogate_batch(np.zeros((1, 3)), [5.0, 1.0])
    with pytest.raises(ParameterError):
        pair.eval_surrogate_batch(np.zeros((1, 3)), [1.0])


def test_dimension_mismatch(pair):
    with pytest.raises(InvalidDimensionError):
        pair.eval_original_batch(np.zeros((2, 4)))


def test_non_finite_output_carries_index():
    p = FunctionPair(1, lambda X: np.where(X[:, 0] > 0, np.nan, 1.0), lambda F, t: F[:, 0],
                     [0.0], [(-1, 1)])
    with pytest.raises(ModelEvaluationError) as info:
        p.eval_original_batch(np.array([[-1.0], [-2.0], [3.0]]))
    assert info.value.index == 2


def test_masked_surrogate_isolates_failures():
    def surr(F, t):
        if np.any(F[:, 0] > 0):
            raise ModelEvaluationError("bad row", index=int(np.argmax(F[:, 0] > 0)))
        return F[:, 0]

    p = FunctionPair(1, lambda X: X[:, 0], surr, [0.0], [(-1, 1)])
    y = p.eval_surrogate_features(np.array([[-1.0], [2.0], [-3.0]]), [0.0], errors="mask")
    np.testing.assert_array_equal(np.isnan(y), [False, True, False])
    with pytest.raises(ModelEvaluationError):
        p.eval_surrogate_features(np.array([[2.0]]), [0.0])


def test_initial_parameters_must_be_in_bounds():
    with pytest.raises(ParameterError):
        FunctionPair(1, lambda X: X[:, 0], lambda F, t: F[:, 0], [3.0], [(0, 1)])


def test_training_set_rejects_duplicates():
    D = TrainingSet(np.zeros((1, 2)), [1.0])
    D2 = D.add([1.0, 0.0], 2.0)
    assert len(D2) == 2 and len(D) == 1
    with pytest.raises(ValueError):
        D2.add([1.0, 0.0], 3.0)
    with pytest.raises(InvalidDimensionError):
        TrainingSet(np.zeros((2, 2)), [1.0])


def test_registry():
    assert get_problem("linear").name == "linear"
    with pytest.raises(KeyError, match="beam"):
        get_problem("nope")


def test_pure_evaluation_is_bitwise_repeatable(rng):
    p = linear_pair()
    X = rng.standard_normal((6, p.dim))
    np.testing.assert_array_equal(p.eval_original_batch(X), p.eval_original_batch(X))
    np.testing.assert_array_equal(p.eval_surrogate_batch(X, p.theta_init),
                                  p.eval_surrogate_batch(X, p.theta_init))


def test_beam_batch_single_consistency():
    p = BeamPair()
    x = np.zeros(p.dim)
    X = np.stack([x, 0.1 * np.ones(p.dim)])
    np.testing.assert_array_equal(p.eval_original_batch(X)[:1], p.eval_original_batch(x))
