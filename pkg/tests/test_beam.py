import numpy as np
import pytest

from codriven.benchmarks import BeamPair
from codriven.benchmarks.fem import CantileverMesh, q4_unit_stiffness
from codriven.errors import ModelEvaluationError


@pytest.fixture(scope="module")
def beam():
    return BeamPair()


def timoshenko_tip(E, nu=0.3, L=5.0, h=2.0, t=1.0, w=2e6, kappa=1.2):
    I = t * h**3 / 12.0
    G = E / (2.0 * (1.0 + nu))
    return w * L**4 / (8 * E * I) + w * L**2 * kappa / (2 * G * h * t)


def test_zero_input_equals_threshold_minus_deflection(beam):
    y = beam.eval_original_batch(np.zeros(beam.dim))[0]
    d = 0.0032 - y
    assert d == pytest.approx(timoshenko_tip(200e9), rel=0.15)


def test_total_load(beam):
    assert -beam.mesh.load_vector.sum() == pytest.approx(20 * 500e3)


def test_deflection_scales_with_inverse_modulus(beam, rng):
    E = 200e9 + 20e9 * rng.random(beam.dim)
    d1 = beam.mesh.tip_deflection(E)
    assert beam.mesh.tip_deflection(2 * E) == pytest.approx(d1 / 2, rel=1e-10)


def test_mesh_refinement():
    coarse = CantileverMesh(50, 20).tip_deflection(np.full(1000, 200e9))
    fine = CantileverMesh(100, 40).tip_deflection(np.full(4000, 200e9))
    assert abs(fine - coarse) / fine < 0.02


def test_reactions_balance_loads(beam, rng):
    E = 200e9 + 30e9 * rng.random(beam.dim)
    m = beam.mesh
    u = m.solve(E)
    f_int = m.internal_forces(E, u)
    react = f_int[:m.n_fixed]
    applied = m.load_vector
    np.testing.assert_allclose(f_int[m.n_fixed:], applied[m.n_fixed:],
                               atol=1e-6 * np.abs(applied).max())
    assert react[1::2].sum() == pytest.approx(-applied.sum(), rel=1e-6)


def test_element_stiffness_symmetric_psd():
    K = q4_unit_stiffness(0.1, 0.1, 0.3)
    np.testing.assert_allclose(K, K.T, atol=1e-12)
    w = np.linalg.eigvalsh(K)
    assert np.sum(w < 1e-10 * w.max()) == 3  # rigid-body modes
    assert w.min() > -1e-10 * w.max()


def test_non_positive_modulus_rejected(beam):
    E = np.full(beam.dim, 200e9)
    E[5] = -1.0
    with pytest.raises(ModelEvaluationError):
        beam.mesh.solve(E)


def test_surrogate_nominal_modulus(beam):
    assert beam.features(np.zeros(beam.dim))[0] == pytest.approx(200e9)
    yp = beam.eval_surrogate_batch(np.zeros(beam.dim), [1.0, 0.0])[0]
    assert yp == pytest.approx(0.0032 - beam.coarse.tip_deflection(np.array([200e9])), rel=1e-12)


def test_surrogate_increasing_in_offset(beam, rng):
    x = 0.3 * rng.standard_normal(beam.dim)
    vals = [beam.eval_surrogate_batch(x, [1.0, b])[0] for b in (-50e9, 0.0, 50e9)]
    assert vals[0] < vals[1] < vals[2]


def test_single_element_deflection_times_modulus_constant(beam):
    prods = [beam.coarse.tip_deflection(np.array([E])) * E for E in (100e9, 200e9, 400e9)]
    np.testing.assert_allclose(prods, prods[0], rtol=1e-12)


def test_surrogate_rejects_non_positive_modulus(beam):
    with pytest.raises(ModelEvaluationError):
        beam.eval_surrogate_batch(np.zeros(beam.dim), [0.2, -50e9])


def test_field_average_matches_features(beam, rng):
    X = rng.standard_normal((3, beam.dim))
    np.testing.assert_allclose(beam.features(X), beam.field_values(X).mean(axis=1), rtol=1e-12)


def test_admissible(beam):
    x = np.zeros((2, beam.dim))
    x[1] = -20.0
    np.testing.assert_array_equal(beam.admissible(x), [True, False])
