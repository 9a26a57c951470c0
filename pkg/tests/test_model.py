"""Linear model, Gaussian sampling, and weight serialization."""

import numpy as np
import pytest

from co_pipeline import scheduling, two_stage
from co_pipeline.model import (
    FeatureMatrix,
    PerturbationConfig,
    WeightVector,
    load_weights,
    predict_theta,
    sample_gaussians,
    save_weights,
)


def test_feature_matrix_validates_kappa():
    values = np.array([[3.0, 4.0], [0.0, 1.0]])
    FeatureMatrix(values=values, kappa_phi=5.0)  # row norms 5 and 1
    with pytest.raises(ValueError):
        FeatureMatrix(values=values, kappa_phi=4.9)


def test_feature_matrix_rejects_non_finite():
    with pytest.raises(ValueError):
        FeatureMatrix(values=np.array([[np.inf]]), kappa_phi=1.0)


def test_weight_vector_box():
    WeightVector(w=np.array([10.0, -10.0]), box_radius=10.0)
    with pytest.raises(ValueError):
        WeightVector(w=np.array([10.1]), box_radius=10.0)
    with pytest.raises(ValueError):
        WeightVector(w=np.array([0.0]), box_radius=0.0)


def test_perturbation_config_validation():
    PerturbationConfig(sigma=0.0, nsamples=1, seed=0)
    with pytest.raises(ValueError):
        PerturbationConfig(sigma=-0.1, nsamples=1, seed=0)
    with pytest.raises(ValueError):
        PerturbationConfig(sigma=1.0, nsamples=0, seed=0)


def test_predict_theta_coordinate_selection():
    phi = FeatureMatrix(values=np.array([[1.0, 2.0], [3.0, 4.0]]), kappa_phi=5.0)
    w0 = WeightVector(w=np.zeros(2), box_radius=1.0)
    assert np.all(predict_theta(w0, phi) == 0.0)
    e1 = WeightVector(w=np.array([0.0, 1.0]), box_radius=1.0)
    assert predict_theta(e1, phi).tolist() == [2.0, 4.0]


def test_predict_theta_is_linear():
    rng = np.random.default_rng(0)
    values = rng.normal(size=(6, 4))
    phi = FeatureMatrix(values=values, kappa_phi=float(np.linalg.norm(values, axis=1).max()))
    w1, w2 = rng.normal(size=4), rng.normal(size=4)
    combo = predict_theta(WeightVector(2.0 * w1 - 0.5 * w2, 100.0), phi)
    parts = 2.0 * predict_theta(WeightVector(w1, 100.0), phi) - 0.5 * predict_theta(
        WeightVector(w2, 100.0), phi
    )
    assert np.allclose(combo, parts, rtol=1e-12, atol=1e-12)


def test_predict_theta_dimension_mismatch():
    phi = FeatureMatrix(values=np.eye(2), kappa_phi=1.0)
    with pytest.raises(ValueError):
        predict_theta(WeightVector(np.zeros(3), 1.0), phi)


def test_predict_theta_raw_cost_weights_recover_theta_tilde():
    # picking out the raw first-stage-cost and mean-second-stage-cost
    # columns must reproduce the hand-built baseline parameters
    x = two_stage.generate_instance(3, 15, 4, seed=9)
    phi = two_stage.features(x, standardize=False)
    w = np.zeros(phi.dim)
    w[1] = 1.0  # first-stage cost column
    w[2] = 1.0  # mean second-stage cost column
    theta = predict_theta(WeightVector(w, 10.0), phi)
    assert np.allclose(theta, two_stage.theta_tilde(x).as_array())


def test_sample_gaussians_deterministic_and_nested():
    cfg5 = PerturbationConfig(sigma=1.0, nsamples=5, seed=42)
    a = sample_gaussians(cfg5, 3)
    b = sample_gaussians(cfg5, 3)
    assert a.shape == (5, 3)
    assert np.array_equal(a, b)
    # prefix nesting: more samples extend, never reshuffle
    cfg9 = PerturbationConfig(sigma=1.0, nsamples=9, seed=42)
    assert np.array_equal(sample_gaussians(cfg9, 3)[:5], a)


def test_sample_gaussians_moments():
    cfg = PerturbationConfig(sigma=1.0, nsamples=100_000, seed=7)
    z = sample_gaussians(cfg, 4)
    # 3 sigma / sqrt(N) band around 0 per coordinate
    assert np.all(np.abs(z.mean(axis=0)) < 0.02)
    # E ||Z||_2 <= sqrt(d), plus sampling slack
    assert np.linalg.norm(z, axis=1).mean() <= np.sqrt(4) + 0.02


def test_kappa_bounds_row_norms_on_random_instances():
    rng = np.random.default_rng(19)
    for _ in range(40):
        if rng.random() < 0.5:
            x = two_stage.generate_instance(
                int(rng.integers(2, 5)), int(rng.integers(1, 25)),
                int(rng.integers(1, 5)), seed=int(rng.integers(10_000)),
            )
            phi = two_stage.features(x)
        else:
            xs = scheduling.generate_sched_instance(
                int(rng.integers(1, 15)), float(rng.uniform(0.2, 3.0)),
                seed=int(rng.integers(10_000)),
            )
            phi = scheduling.features(xs)
        norms = np.linalg.norm(phi.values, axis=1)
        assert np.all(norms <= phi.kappa_phi + 1e-9)


def test_weights_round_trip(tmp_path):
    wv = WeightVector(w=np.array([0.5, -2.0, 3.25]), box_radius=4.0)
    path = tmp_path / "w.json"
    save_weights(path, wv)
    back = load_weights(path)
    assert np.array_equal(back.w, wv.w)
    assert back.box_radius == 4.0
    assert back.dim == 3
    # same bytes when saved again (stable serialization)
    again = tmp_path / "w2.json"
    save_weights(again, back)
    assert path.read_bytes() == again.read_bytes()
