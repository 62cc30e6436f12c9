import math
import warnings

import numpy as np
import pytest

from errors import DegenerateWeightsWarning
from math_core import effective_sample_size, rng_stream, weighted_moments
from models import (
    LINEAR_CV,
    MotionModel,
    SensorModel,
    make_sensor_pair,
    measure,
    process_noise_cov,
    scenario_model,
    scenario_sensors,
)
from simulation import generate_measurements, generate_truth
from sir_pf import (
    ParticleSet,
    StateGaussian,
    init_particles,
    predict,
    prior_from_config,
    resample,
    reweight,
    step,
    summarize,
    uniform_logweights,
    update_measurement,
)

CV = MotionModel(LINEAR_CV, 1.0, 0.1)
PRIOR = StateGaussian(np.array([100.0, 10.0, 100.0, 10.0]), np.diag([50.0, 1.0, 50.0, 1.0]))


def _rng(variant=0):
    return rng_stream(21, 0, "primary", "filter", variant)


def test_init_zero_covariance_copies_mean():
    ps = init_particles(StateGaussian(PRIOR.mean, np.zeros((4, 4))), 10, _rng())
    np.testing.assert_array_equal(ps.states, np.tile(PRIOR.mean, (10, 1)))
    np.testing.assert_allclose(ps.weights, np.full(10, 0.1))


def test_init_single_particle():
    ps = init_particles(PRIOR, 1, _rng())
    assert ps.states.shape == (1, 4)
    assert ps.weights.tolist() == [1.0]


def test_init_sample_mean_clt_bound():
    n = 100_000
    ps = init_particles(PRIOR, n, _rng())
    bound = 4 * np.sqrt(np.diag(PRIOR.cov)) / np.sqrt(n)
    assert np.all(np.abs(ps.states.mean(axis=0) - PRIOR.mean) < bound)


def test_predict_noiseless_is_deterministic():
    ps = init_particles(PRIOR, 5, _rng())
    moved = predict(ps, CV, np.zeros((4, 4)), _rng(1))
    expected = ps.states.copy()
    expected[:, 0] += expected[:, 1]
    expected[:, 2] += expected[:, 3]
    np.testing.assert_allclose(moved.states, expected)
    assert moved.step == ps.step + 1


def test_predict_adds_process_covariance():
    ps = ParticleSet(np.zeros((50_000, 4)), uniform_logweights(50_000))
    static = MotionModel(LINEAR_CV, 1.0, 0.0)
    moved = predict(ps, static, np.eye(4), _rng())
    np.testing.assert_allclose(np.cov(moved.states.T), np.eye(4), atol=0.03)


def test_identical_particles_keep_uniform_weights():
    ps = ParticleSet(np.tile(PRIOR.mean, (4, 1)), uniform_logweights(4))
    sensor = SensorModel(np.diag([100.0, 1e-5]), 1.0)
    updated = update_measurement(ps, np.array([150.0, 0.7]), sensor)
    np.testing.assert_allclose(updated.weights, np.full(4, 0.25))


def test_particle_at_measurement_preimage_dominates():
    states = np.array([[100.0, 0.0, 100.0, 0.0], [130.0, 0.0, 80.0, 0.0]])
    ps = ParticleSet(states, uniform_logweights(2))
    sensor = SensorModel(np.diag([1e-2, 1e-8]), 1.0)
    updated = update_measurement(ps, measure(states[0]), sensor)
    assert updated.weights[0] == pytest.approx(1.0, abs=1e-12)


def test_bearing_residual_wraps_in_likelihood():
    near = np.array([[-100.0, 0.0, 1.0, 0.0], [-100.0, 0.0, -1.0, 0.0]])
    ps = ParticleSet(near, uniform_logweights(2))
    sensor = SensorModel(np.diag([1.0, 1e-4]), 1.0)
    z = np.array([100.0, math.pi - 0.005])
    updated = update_measurement(ps, z, sensor)
    assert 0.2 < updated.weights[0] < 0.8


def test_degenerate_weights_reset_and_counted():
    ps = ParticleSet(np.zeros((3, 4)), uniform_logweights(3))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        updated = reweight(ps, np.full(3, -np.inf))
    assert updated.degenerate_events == 1
    np.testing.assert_allclose(updated.weights, np.full(3, 1 / 3))
    assert any(issubclass(w.category, DegenerateWeightsWarning) for w in caught)


def test_resample_keeps_input_multiset_and_records_ess():
    states = np.arange(20, dtype=float).reshape(5, 4)
    logw = np.log(np.array([0.1, 0.2, 0.3, 0.25, 0.15]))
    ps = ParticleSet(states, logw)
    out = resample(ps, _rng())
    assert out.ess == pytest.approx(effective_sample_size(ps.weights))
    np.testing.assert_allclose(out.weights, np.full(5, 0.2))
    rows = {tuple(row) for row in states}
    assert all(tuple(row) in rows for row in out.states)


def test_resample_point_mass():
    states = np.arange(12, dtype=float).reshape(3, 4)
    logw = np.array([0.0, -np.inf, -np.inf])
    out = resample(ParticleSet(states, logw), _rng())
    np.testing.assert_array_equal(out.states, np.tile(states[0], (3, 1)))


def test_summarize_repeated_particle():
    Q_v = process_noise_cov(CV)
    ps = ParticleSet(np.tile(PRIOR.mean, (6, 1)), uniform_logweights(6))
    estimate = summarize(ps, Q_v)
    np.testing.assert_allclose(estimate.mean, PRIOR.mean)
    np.testing.assert_allclose(estimate.cov, Q_v)


def test_summarize_midpoint_and_oracle():
    cloud = _rng(3).normal(size=(7, 4))
    ps = ParticleSet(cloud, uniform_logweights(7))
    Q_v = process_noise_cov(CV)
    mean, cov = weighted_moments(cloud, ps.weights)
    estimate = summarize(ps, Q_v)
    np.testing.assert_allclose(estimate.mean, mean)
    np.testing.assert_allclose(estimate.cov, cov + Q_v)

    pair = ParticleSet(np.array([[0.0] * 4, [2.0] * 4]), uniform_logweights(2))
    np.testing.assert_allclose(summarize(pair, Q_v).mean, [1.0] * 4)


def test_noiseless_tracking_is_exact():
    static = MotionModel(LINEAR_CV, 1.0, 0.0)
    x = PRIOR.mean.copy()
    ps = init_particles(StateGaussian(x, np.zeros((4, 4))), 20, _rng())
    sensor = SensorModel(np.diag([1.0, 1e-6]), 1.0)
    rng = _rng(1)
    for _ in range(5):
        x = np.array([x[0] + x[1], x[1], x[2] + x[3], x[3]])
        ps, estimate = step(ps, measure(x), static, sensor, rng)
        np.testing.assert_allclose(estimate.mean, x, atol=1e-9)


def test_step_is_deterministic_for_fixed_stream():
    sensor = make_sensor_pair(1.0, 4.0, 10.0, math.sqrt(10) * 1e-3)[1]
    z = np.array([160.0, 0.78])
    first = step(init_particles(PRIOR, 100, _rng()), z, CV, sensor, _rng(1))
    second = step(init_particles(PRIOR, 100, _rng()), z, CV, sensor, _rng(1))
    np.testing.assert_array_equal(first[0].states, second[0].states)
    np.testing.assert_array_equal(first[1].mean, second[1].mean)


def test_short_scenario_one_run_is_bounded(small_s1):
    truth = generate_truth(small_s1, rng_stream(1, 0, "shared", "truth"))
    sensor = scenario_sensors(small_s1, 4.0)[1]
    measurements = generate_measurements(truth, sensor, rng_stream(1, 0, "primary", "measurement"))
    ps = init_particles(prior_from_config(small_s1), 300, _rng())
    model = scenario_model(small_s1)
    rng = _rng(1)
    for k, z in enumerate(measurements, start=1):
        ps, estimate = step(ps, z, model, sensor, rng)
        error = np.hypot(*(estimate.mean[[0, 2]] - truth[k, [0, 2]]))
        assert np.isfinite(error) and error < 200.0
