import math

import numpy as np
import pytest

from errors import ValidationError
from experiments import (
    CorruptionSpec, PolyTarget, convergence_study, corrupt_inputs, eigen_amplification, eigen_study,
    polytest_study, polytest_weight_law, probe_pairs, save_study, stability_study, sum_of_sines,
)
from kernel_oracles import SparseSignD1
from nonlinearities import Cosine
from rng import stream
from sparse_features import DegreeSpec, WeightLaw

FULL = (-math.pi, math.pi)


# --- Targets and corruption ---

def test_poly_target_calibration():
    rng = np.random.default_rng(0)
    target = PolyTarget.sample(16, rng)
    assert target.terms.shape == (3, 3)
    assert all(len(set(t)) == 3 for t in target.terms.tolist())
    X = rng.random((100_000, 16))
    norm = math.sqrt(0.05**2 + 0.95**2)
    assert np.std(target.c1 * target.linear_part(X)) == pytest.approx(0.95 / norm, rel=0.02)
    assert np.std(target.c2 * target.nonlinear_part(X)) == pytest.approx(0.05 / norm, rel=0.02)
    with pytest.raises(ValidationError):
        PolyTarget.sample(2, rng)


def test_sum_of_sines():
    np.testing.assert_allclose(sum_of_sines([[0.0, math.pi / 2], [math.pi / 2, math.pi / 2]]), [1.0, 2.0])


def test_corruption_extremes_and_modes():
    X = np.random.default_rng(1).normal(size=(200, 10))
    clean, mask = corrupt_inputs(X, CorruptionSpec(0.0), seed=3)
    assert np.array_equal(clean, X) and not mask.any()
    noisy, mask = corrupt_inputs(X, CorruptionSpec(1.0), seed=3)
    assert mask.all() and not np.any(noisy == X)
    _, mask = corrupt_inputs(X, CorruptionSpec(0.3, mode="per-sample"), seed=4)
    assert np.all(mask.all(axis=1) | ~mask.any(axis=1))
    _, mask = corrupt_inputs(np.zeros((1000, 10)), CorruptionSpec(0.2), seed=5)
    assert abs(mask.mean() - 0.2) < 0.02
    a, _ = corrupt_inputs(X, CorruptionSpec(0.2), seed=6)
    b, _ = corrupt_inputs(X, CorruptionSpec(0.2), seed=6)
    assert np.array_equal(a, b)


@pytest.mark.parametrize("kwargs", [{"p": -0.1}, {"p": 1.1}, {"p": 0.1, "sigma": 0.0}, {"p": 0.1, "mode": "burst"}])
def test_invalid_corruption_specs(kwargs):
    with pytest.raises(ValidationError):
        CorruptionSpec(**kwargs)


# --- Convergence ---

def test_probe_pairs_mix():
    X, Y = probe_pairs(3, 8, np.random.default_rng(0))
    assert X.shape == Y.shape == (8, 3)
    np.testing.assert_array_equal(Y[4:6], -X[4:6])
    assert np.max(np.abs(Y[6:] - X[6:])) <= 0.01
    assert np.all(np.abs(X) <= 1.0) and np.all(np.abs(Y) <= 1.0)


def test_convergence_study_small_grid():
    law = WeightLaw("gaussian-iso", 1.0, FULL)
    kwargs = dict(l=4, nonlinearity=Cosine(), degree_spec=DegreeSpec.regular(4, 2), weight_law=law,
                  m_grid=[64, 4096], n_probe_pairs=50, seed=2)
    result = convergence_study(**kwargs)
    assert [row["m"] for row in result.rows] == [64, 4096]
    assert result.rows[1]["sup_error"] < result.rows[0]["sup_error"]
    assert all(row["mean_error"] <= row["sup_error"] for row in result.rows)
    assert convergence_study(**kwargs, workers=4).rows == result.rows
    with pytest.raises(ValidationError):
        convergence_study(**{**kwargs, "m_grid": [0, 64]})


@pytest.mark.slow
def test_convergence_rate_is_monte_carlo():
    law = WeightLaw("gaussian-iso", 1.0, FULL)
    result = convergence_study(8, Cosine(), DegreeSpec.regular(8, 8), law, [256, 1024, 4096, 16384], seed=0)
    assert result.summary["loglog_slope"] == pytest.approx(-0.5, abs=0.15)
    assert result.rows[-1]["sup_error"] < 0.05


@pytest.mark.slow
def test_scaled_weights_need_no_more_features_than_isotropic():
    grid = [256, 1024, 4096]
    degree = DegreeSpec.binomial(8, 0.5)
    iso = convergence_study(8, Cosine(), degree, WeightLaw("gaussian-iso", 1.0, FULL), grid, seed=1)
    scaled = convergence_study(8, Cosine(), degree, WeightLaw("gaussian-scaled", 1.0, FULL), grid, seed=1)
    for a, b in zip(iso.rows, scaled.rows):
        assert b["sup_error"] <= 2.0 * a["sup_error"]


# --- Polynomial test function ---

def test_polytest_weight_conventions():
    assert polytest_weight_law(16).sigma == pytest.approx(0.5)
    assert polytest_weight_law(4, "inverse_degree").std_for_degree(4) == pytest.approx(0.5)
    with pytest.raises(ValidationError):
        polytest_weight_law(4, "sqrt")


def test_polytest_small_grid_shape_and_floor():
    result = polytest_study(l=6, d_grid=(1, 3), n_grid=(50, 100), seed=0, m=40, n_test=2000, n_calibration=10_000)
    assert [(r["d"], r["n"]) for r in result.rows] == [(1, 50), (1, 100), (3, 50), (3, 100)]
    for row in result.rows:
        assert row["test_mse"] > 0.0025 * 0.8
        assert row["selected_lambda"] in result.params["lambda_grid"]
    with pytest.raises(ValidationError):
        polytest_study(l=6, d_grid=(7,), n_grid=(50,))
    with pytest.raises(ValidationError):
        polytest_study(l=6, d_grid=(1,), n_grid=(3,))


@pytest.mark.slow
def test_polytest_orderings_over_ten_seeds():
    first_order_wins = close_at_800 = 0
    for seed in range(10):
        rows = polytest_study(seed=seed).rows
        assert all(r["test_mse"] >= 0.0025 * 0.8 for r in rows)
        at_100 = {r["d"]: r["test_mse"] for r in rows if r["n"] == 100}
        first_order_wins += min(at_100, key=at_100.get) == 1
        at_800 = [r["test_mse"] for r in rows if r["n"] == 800 and r["d"] in (3, 10, 16)]
        close_at_800 += max(at_800) <= 2.0 * min(at_800)
    assert first_order_wins >= 7
    assert close_at_800 >= 7


# --- Stability under corruption ---

def test_stability_clean_control():
    result = stability_study(n=400, l=5, p=0.0, seed=1)
    scores = {row["model"]: row for row in result.rows}
    assert set(scores) == {"linear", "kernel", "trim+linear", "huber"}
    assert scores["linear"]["test_r2"] >= 1 - 1e-6
    assert result.summary["n_train"] == 300 and result.summary["n_test"] == 100


def test_stability_is_deterministic():
    a = stability_study(n=200, l=5, p=0.05, seed=7)
    b = stability_study(n=200, l=5, p=0.05, seed=7, workers=3)
    assert a.rows == b.rows


@pytest.mark.slow
def test_stability_orderings_over_twenty_seeds():
    # observed over seeds 0..19: kernel beats both baselines in every seed
    kernel_over_linear = kernel_over_trim = trim_over_linear = 0
    for seed in range(20):
        scores = {row["model"]: row["test_r2"] for row in stability_study(seed=seed).rows}
        kernel_over_linear += scores["kernel"] > scores["linear"]
        kernel_over_trim += scores["kernel"] > scores["trim+linear"]
        trim_over_linear += scores["trim+linear"] > scores["linear"]
    assert kernel_over_linear >= 16
    assert kernel_over_trim >= 16
    assert trim_over_linear > 10


# --- Eigenvalue amplification ---

def test_no_corruption_means_zero_amplification():
    X = np.random.default_rng(2).normal(size=(60, 4))
    (res,) = eigen_amplification(X, [(0.0, 6.0)], SparseSignD1(1.0), seed=0)
    assert np.all(res.db == 0.0)
    assert res.mean_db() == 0.0


def test_amplification_ordering_and_summaries():
    X = np.random.default_rng(3).normal(size=(80, 5))
    results = eigen_amplification(X, [(0.05, 6.0), (0.5, 6.0)], SparseSignD1(1.0), seed=1, workers=2)
    assert [r.p for r in results] == [0.05, 0.5]
    for r in results:
        assert np.all(np.diff(np.abs(r.clean)) <= 0)
        assert np.all(np.diff(np.abs(r.noisy)) <= 0)
    assert results[1].top_mean_abs_db() > results[0].top_mean_abs_db()


def test_eigen_study_rows_and_persistence(tmp_path):
    result = eigen_study(n=30, l=4, configs=((0.1, 6.0), (0.3, 2.0)), seed=2)
    assert len(result.rows) == 60
    csv_path, meta_path = save_study(result, tmp_path, seed=2)
    first = csv_path.read_bytes()
    save_study(eigen_study(n=30, l=4, configs=((0.1, 6.0), (0.3, 2.0)), seed=2), tmp_path, seed=2)
    assert csv_path.read_bytes() == first
    assert first.decode().splitlines()[0] == "p,sigma,index,clean_eigenvalue,noisy_eigenvalue,amplification_db"
    assert '"seed": 2' in meta_path.read_text()


@pytest.mark.slow
def test_amplification_grows_with_density_but_not_amplitude():
    configs = [(0.03, 6.0), (0.2, 6.0), (0.5, 6.0), (0.03, 2.0), (0.03, 10.0)]
    X = stream(0, 0).standard_normal((800, 10))
    res = {(r.p, r.sigma): r for r in eigen_amplification(X, configs, SparseSignD1(1.0), seed=0, workers=4)}
    means = [res[(p, 6.0)].mean_db() for p in (0.03, 0.2, 0.5)]
    assert means[0] < means[1] < means[2]
    top = [res[(0.03, s)].top_mean_abs_db() for s in (2.0, 6.0, 10.0)]
    assert max(top) - min(top) < 3.0


def test_polytest_and_eigen_rows_do_not_depend_on_workers():
    kwargs = dict(l=5, d_grid=(1, 2), n_grid=(30, 40), seed=4, m=15, n_test=300, n_calibration=2000)
    assert polytest_study(**kwargs, workers=1).rows == polytest_study(**kwargs, workers=8).rows
    kwargs = dict(n=40, l=4, configs=((0.1, 6.0), (0.4, 2.0)), seed=4)
    assert eigen_study(**kwargs, workers=1).rows == eigen_study(**kwargs, workers=8).rows
