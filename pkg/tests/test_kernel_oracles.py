import json
import math

import numpy as np
import pytest

import config
from errors import CombinatorialGuardError, DimensionMismatchError, DomainError, NoOracleError, ValidationError
from kernel_oracles import (
    RBF, ArcCos0, DegreeMixture, DenseSign, GaussianQuadrature, MGFGaussian, RegularAdditive, Scaled, SparseSignD1,
    SparseStepD1, arccos0_kernel, degree_mixture_kernel, dense_sign_kernel, gram_matrix, kernel_from_dict,
    mgf_gaussian_kernel, oracle_for, rbf_kernel, regular_additive_kernel, sparse_sign_d1, sparse_step_d1,
    write_gram_csv,
)
from nonlinearities import Cosine, Exponential, Sign, SinCosPair, Step, ThresholdPoly
from sparse_features import DegreeSpec, WeightLaw, build_feature_map, paired_empirical_kernel

FULL = (-math.pi, math.pi)


def _monte_carlo(l, degree, law, nonlinearity, X, Y, m=20000, seed=9):
    fmap = build_feature_map(l, m, degree, law, nonlinearity, seed)
    return paired_empirical_kernel(fmap, X, Y)


def _relu_arccos(x, y, s):
    nx, ny = np.linalg.norm(x), np.linalg.norm(y)
    theta = math.acos(np.clip(x @ y / (nx * ny), -1.0, 1.0))
    return s**2 * nx * ny * (math.sin(theta) + (math.pi - theta) * math.cos(theta)) / (2 * math.pi)


# --- Closed forms ---

def test_rbf_values():
    assert rbf_kernel([1.0, 2.0], [1.0, 2.0], 0.7) == 1.0
    assert rbf_kernel([0.0, 0.0], [1.0, 0.0], 1.0) == pytest.approx(math.exp(-0.5), abs=1e-15)
    with pytest.raises(ValidationError):
        RBF(0.0)


def test_arccos0_angles():
    assert arccos0_kernel([1.0, 0.0], [0.0, 3.0]) == pytest.approx(0.5, abs=1e-15)
    assert arccos0_kernel([1.0, 1.0], [2.0, 2.0]) == pytest.approx(1.0, abs=1e-15)
    assert arccos0_kernel([1.0, -2.0], [-1.0, 2.0]) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(DomainError):
        arccos0_kernel([0.0, 0.0], [1.0, 0.0])


def test_sparse_step_hamming_with_sign_of_zero():
    assert sparse_step_d1([1.0, -1.0, 0.0], [1.0, 1.0, 0.0]) == pytest.approx(2 / 3)
    assert sparse_step_d1([0.0], [1.0]) == 0.0
    assert sparse_step_d1([0.5, -2.0], [3.0, -0.1]) == 1.0


def test_arccos_restricted_to_one_coordinate_is_the_step_kernel():
    X = np.random.default_rng(0).normal(size=(10_000, 8))
    Y = np.random.default_rng(1).normal(size=(10_000, 8))
    additive = RegularAdditive(1, ArcCos0()).paired(X, Y)
    np.testing.assert_allclose(additive, SparseStepD1().paired(X, Y), rtol=0, atol=1e-12)


def test_first_order_additive_stump_is_the_l1_kernel():
    X = np.random.default_rng(20).uniform(-3, 3, size=(10_000, 8))
    Y = np.random.default_rng(21).uniform(-3, 3, size=(10_000, 8))
    spec = SparseSignD1(0.37)
    np.testing.assert_allclose(RegularAdditive(1, spec).paired(X, Y), spec.paired(X, Y), rtol=0, atol=1e-12)
    for x, y in zip(X[:50], Y[:50]):
        assert regular_additive_kernel(x, y, 1, spec) == pytest.approx(sparse_sign_d1(x, y, 0.37, 8), abs=1e-12)


def test_sparse_sign_values_and_dimension_check():
    assert sparse_sign_d1([0.0, 0.0], [1.0, 1.0], 1.0, 2) == pytest.approx(0.0)
    assert sparse_sign_d1([0.3, 0.1], [0.3, 0.1], 0.4, 2) == 1.0
    # may go negative for distant points
    assert sparse_sign_d1([-5.0], [5.0], 1.0, 1) == pytest.approx(-9.0)
    with pytest.raises(DimensionMismatchError):
        sparse_sign_d1([0.0, 0.0], [1.0, 1.0], 1.0, 3)
    assert SparseSignD1.from_laws(0.5, -1.0, 1.0).c == pytest.approx(0.5)


def test_dense_sign_formula():
    x, y = np.array([0.0, 0.0, 0.0, 0.0]), np.array([0.5, 0.5, 0.5, 0.5])
    expected = 1 - 2 * 1.0 * math.sqrt(2 / (math.pi * 4)) * 1.0 / 4.0
    assert dense_sign_kernel(x, y, 1.0, -2.0, 2.0, 4) == pytest.approx(expected, abs=1e-14)


def test_mgf_gaussian_formula_and_validation():
    mean, cov = np.array([0.1, -0.2]), np.array([[0.5, 0.1], [0.1, 0.3]])
    x, y = np.array([0.2, 0.4]), np.array([-0.1, 0.3])
    s = x + y
    expected = 2.0 * math.exp(mean @ s + 0.5 * s @ cov @ s)
    assert mgf_gaussian_kernel(x, y, mean, cov, 2.0) == pytest.approx(expected, rel=1e-14)
    with pytest.raises(ValidationError):
        MGFGaussian(mean, np.array([[1.0, 0.5], [0.0, 1.0]]))
    with pytest.raises(ValidationError):
        MGFGaussian(mean, np.array([[1.0, 0.0], [0.0, -1.0]]))
    with pytest.raises(ValidationError):
        MGFGaussian(mean, cov, bias_constant=math.inf)
    with pytest.raises(DimensionMismatchError):
        MGFGaussian(mean, cov).evaluate([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])


# --- Additive constructions ---

def test_regular_additive_special_orders():
    rng = np.random.default_rng(2)
    x, y = rng.normal(size=5), rng.normal(size=5)
    full = regular_additive_kernel(x, y, 5, RBF(1.3))
    assert full == pytest.approx(rbf_kernel(x, y, 1.3), rel=1e-14)
    first = regular_additive_kernel(x, y, 1, RBF(1.3))
    assert first == pytest.approx(np.mean([rbf_kernel([a], [b], 1.3) for a, b in zip(x, y)]), rel=1e-14)
    with pytest.raises(DimensionMismatchError):
        regular_additive_kernel(x, y, 6, RBF(1.0))


def test_combinatorial_guard():
    x = np.zeros(40)
    with pytest.raises(CombinatorialGuardError, match="Monte Carlo"):
        regular_additive_kernel(x, x, 20, RBF(1.0))


def test_degree_mixture_reduces_to_regular_and_needs_zero_constant():
    rng = np.random.default_rng(3)
    x, y = rng.random(4), rng.random(4)
    pmf = [0.0, 0.0, 1.0, 0.0, 0.0]
    assert degree_mixture_kernel(x, y, pmf, {2: RBF(1.0)}) == pytest.approx(
        regular_additive_kernel(x, y, 2, RBF(1.0)), rel=1e-14)
    mixed = degree_mixture_kernel(x, y, [0.25, 0.75, 0, 0, 0], {1: RBF(1.0)}, zero_constant=2.0)
    assert mixed == pytest.approx(0.5 + 0.75 * regular_additive_kernel(x, y, 1, RBF(1.0)), rel=1e-14)
    with pytest.raises(ValidationError):
        DegreeMixture([0.5, 0.5, 0.0], {1: RBF(1.0)})
    with pytest.raises(ValidationError):
        DegreeMixture([0.0, 0.5, 0.5], {1: RBF(1.0)})
    with pytest.raises(ValidationError):
        DegreeMixture([0.0, 0.6, 0.6], {1: RBF(1.0), 2: RBF(1.0)})


def test_kernel_round_trips_through_json():
    spec = DegreeMixture([0.1, 0.4, 0.5], {1: RBF(0.5), 2: Scaled(0.5, ArcCos0())}, zero_constant=1.0)
    restored = kernel_from_dict(json.loads(json.dumps(spec.to_dict())))
    X = np.random.default_rng(4).normal(size=(10, 2))
    Y = np.random.default_rng(5).normal(size=(10, 2))
    assert np.array_equal(spec.paired(X, Y), restored.paired(X, Y))
    with pytest.raises(ValidationError):
        kernel_from_dict({"variant": "laplace"})


# --- Gram matrices ---

def test_gram_is_symmetric_and_independent_of_workers(monkeypatch, tmp_path):
    monkeypatch.setattr(config, "GRAM_CHUNK_PAIRS", 100)
    X = np.random.default_rng(6).normal(size=(50, 4))
    spec = RegularAdditive(2, RBF(1.0))
    G1 = gram_matrix(spec, X, workers=1)
    G4 = gram_matrix(spec, X, workers=4)
    assert np.array_equal(G1, G4)
    assert np.array_equal(G1, G1.T)
    np.testing.assert_allclose(G1, spec.cross(X, X), rtol=0, atol=1e-15)
    with pytest.raises(ValidationError):
        gram_matrix("rbf", X)

    path = write_gram_csv(G1[:3, :3], tmp_path / "gram.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "n,3"
    assert [float(v) for v in lines[1].split(",")] == G1[0, :3].tolist()


# --- Oracles against Monte Carlo features ---

def _probes(l, n=20, seed=7, low=-1.0, high=1.0):
    rng = np.random.default_rng(seed)
    return rng.uniform(low, high, size=(n, l)), rng.uniform(low, high, size=(n, l))


def test_cosine_features_converge_to_additive_rbf():
    degree, law = DegreeSpec.regular(6, 3), WeightLaw("gaussian-iso", 1.0, FULL)
    oracle = oracle_for(6, degree, law, Cosine())
    assert isinstance(oracle, RegularAdditive)
    X, Y = _probes(6)
    assert np.max(np.abs(_monte_carlo(6, degree, law, Cosine(), X, Y) - oracle.paired(X, Y))) < 0.05


def test_step_features_converge_to_half_hamming_kernel():
    degree, law = DegreeSpec.regular(5, 1), WeightLaw("gaussian-iso", 1.0, None)
    oracle = oracle_for(5, degree, law, Step())
    X, Y = _probes(5)
    expected = 0.5 * SparseStepD1().paired(X, Y)
    np.testing.assert_allclose(oracle.paired(X, Y), expected, rtol=0, atol=1e-15)
    assert np.max(np.abs(_monte_carlo(5, degree, law, Step(), X, Y) - expected)) < 0.03


def test_sign_stumps_converge_to_l1_kernel():
    degree, law = DegreeSpec.regular(4, 1), WeightLaw("gaussian-iso", 0.5, (-2.0, 2.0))
    oracle = oracle_for(4, degree, law, Sign())
    assert isinstance(oracle, SparseSignD1)
    assert oracle.c == pytest.approx(2 * 0.5 * math.sqrt(2 / math.pi) / 4.0)
    X, Y = _probes(4)
    assert np.max(np.abs(_monte_carlo(4, degree, law, Sign(), X, Y) - oracle.paired(X, Y))) < 0.05


def test_sign_features_of_higher_degree_converge_to_dense_sign_kernel():
    degree, law = DegreeSpec.regular(4, 2), WeightLaw("gaussian-iso", 0.4, (-2.0, 2.0))
    oracle = oracle_for(4, degree, law, Sign())
    assert isinstance(oracle, RegularAdditive) and isinstance(oracle.base, DenseSign)
    X, Y = _probes(4)
    assert np.max(np.abs(_monte_carlo(4, degree, law, Sign(), X, Y) - oracle.paired(X, Y))) < 0.05


def test_exponential_features_converge_to_mgf_kernel():
    degree, law = DegreeSpec.regular(2, 2), WeightLaw("gaussian-iso", 0.5, None)
    oracle = oracle_for(2, degree, law, Exponential())
    X, Y = _probes(2, low=-0.5, high=0.5)
    np.testing.assert_allclose(_monte_carlo(2, degree, law, Exponential(), X, Y), oracle.paired(X, Y), rtol=0.05)


def test_binomial_sincos_features_converge_to_degree_mixture():
    degree, law = DegreeSpec.binomial(6, 0.4), WeightLaw("gaussian-scaled", 1.0, FULL)
    oracle = oracle_for(6, degree, law, SinCosPair())
    assert isinstance(oracle, DegreeMixture)
    assert oracle.zero_constant == 1.0
    X, Y = _probes(6, n=50)
    empirical = _monte_carlo(6, degree, law, SinCosPair(), X, Y, m=100_000)
    assert np.max(np.abs(empirical - oracle.paired(X, Y))) < 0.02


def test_quadrature_matches_first_order_arccos_kernel():
    spec = GaussianQuadrature("threshold-poly:1", 0.8)
    X, Y = _probes(3, n=10, seed=8)
    expected = np.array([_relu_arccos(x, y, 0.8) for x, y in zip(X, Y)])
    np.testing.assert_allclose(spec.paired(X, Y), expected, rtol=5e-2, atol=5e-3)


def test_quadrature_oracle_agrees_with_biased_relu_features():
    degree, law = DegreeSpec.regular(3, 3), WeightLaw("gaussian-iso", 1.0, (-1.0, 1.0))
    oracle = oracle_for(3, degree, law, ThresholdPoly(1))
    X, Y = _probes(3, n=10, seed=10)
    assert np.max(np.abs(_monte_carlo(3, degree, law, ThresholdPoly(1), X, Y) - oracle.paired(X, Y))) < 0.05


@pytest.mark.parametrize("law, nonlinearity", [
    (WeightLaw("rademacher", 1.0, FULL), Cosine()),
    (WeightLaw("gaussian-iso", 1.0, (-1.0, 1.0)), Step()),
    (WeightLaw("gaussian-iso", 1.0, (0.0, math.pi / 2)), Cosine()),
    (WeightLaw("gaussian-iso", 1.0, None), Sign()),
])
def test_configurations_without_an_oracle(law, nonlinearity):
    with pytest.raises(NoOracleError):
        oracle_for(4, DegreeSpec.regular(4, 2), law, nonlinearity)


def test_zero_coordinates_agree_in_the_stump_limit_but_not_in_the_features():
    degree, law = DegreeSpec.regular(3, 1), WeightLaw("gaussian-iso", 1.0, None)
    zeros = np.zeros((1, 3))
    assert oracle_for(3, degree, law, Step()).paired(zeros, zeros)[0] == 0.5
    assert _monte_carlo(3, degree, law, Step(), zeros, zeros, m=100)[0] == 0.0
