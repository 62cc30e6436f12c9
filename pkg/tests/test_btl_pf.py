import math
from dataclasses import replace

import numpy as np
import pytest
from scipy import stats

from btl_pf import (
    MeasurementPair,
    PredictedObservationCloud,
    ReplayChannel,
    TransferChannel,
    TransferPacket,
    dump_packets,
    load_packets,
    packet_from_cloud,
    predict_observations,
    primary_step,
    primary_update,
    run_dual,
    source_step,
)
from errors import StaleTransferPacketError
from math_core import rng_stream
from models import (
    LINEAR_CV,
    MotionModel,
    SensorModel,
    measure,
    measurement_moments,
    scenario_model,
    scenario_sensors,
)
from sir_pf import (
    ParticleSet,
    StateGaussian,
    init_particles,
    prior_from_config,
    step as sir_step,
    uniform_logweights,
)
from simulation import run_measurements, run_truth, tl_pf_streams

STATIC = MotionModel(LINEAR_CV, 1.0, 0.0)
CV = MotionModel(LINEAR_CV, 1.0, 0.1)
SENSOR = SensorModel(np.diag([100.0, 1e-5]), 4.0)
SENSOR_STAR = SensorModel(np.diag([100.0, 1e-5]), 1.0)
PRIOR = StateGaussian(np.array([100.0, 10.0, 100.0, 10.0]), np.diag([50.0, 1.0, 50.0, 1.0]))


def _rng(variant=0):
    return rng_stream(33, 0, "source", "filter", variant)


def test_noiseless_static_packet_is_exact():
    x = np.array([100.0, 0.0, 100.0, 0.0])
    ps = ParticleSet(np.tile(x, (10, 1)), uniform_logweights(10))
    silent = SensorModel(np.zeros((2, 2)), 1.0)
    packet = packet_from_cloud(predict_observations(ps, STATIC, silent, _rng()), silent)
    np.testing.assert_allclose(packet.eta_mean, measure(x), atol=1e-12)
    np.testing.assert_allclose(packet.eta_cov, np.zeros((2, 2)), atol=1e-12)
    assert packet.for_step == 1


def test_packet_dominated_by_source_noise():
    x = np.array([100.0, 0.0, 100.0, 0.0])
    ps = ParticleSet(np.tile(x, (10, 1)), uniform_logweights(10))
    loud = SensorModel(np.diag([1e6, 1.0]), 1.0)
    packet = packet_from_cloud(
        predict_observations(ps, STATIC, loud, _rng(), noise_mode="analytic"), loud
    )
    np.testing.assert_allclose(packet.eta_cov, loud.noise_cov)


def test_packet_matches_recorded_cloud():
    ps = init_particles(PRIOR, 50, _rng())
    cloud = predict_observations(ps, CV, SENSOR_STAR, _rng(1))
    packet = packet_from_cloud(cloud, SENSOR_STAR)

    eta = cloud.eta_particles
    mean = eta.mean(axis=0)
    scatter = sum(np.outer(e - mean, e - mean) for e in eta) / eta.shape[0]
    np.testing.assert_allclose(packet.eta_mean, mean, rtol=1e-12)
    np.testing.assert_allclose(packet.eta_cov, scatter + SENSOR_STAR.noise_cov, rtol=1e-9)


def test_predict_observations_leaves_particles_untouched():
    ps = init_particles(PRIOR, 30, _rng())
    before = ps.states.copy()
    cloud = predict_observations(ps, CV, SENSOR_STAR, _rng(1))
    np.testing.assert_array_equal(ps.states, before)
    assert isinstance(cloud, PredictedObservationCloud)
    np.testing.assert_allclose(cloud.weights.sum(), 1.0)


def test_missing_packet_reduces_to_isolated_step():
    z = np.array([160.0, 0.78])
    ps = init_particles(PRIOR, 200, _rng())
    with_none, estimate_none = primary_step(ps, z, None, CV, SENSOR, _rng(5))
    isolated, estimate_isolated = sir_step(ps, z, CV, SENSOR, _rng(5))
    np.testing.assert_array_equal(with_none.states, isolated.states)
    np.testing.assert_array_equal(estimate_none.mean, estimate_isolated.mean)
    np.testing.assert_array_equal(estimate_none.cov, estimate_isolated.cov)


def test_uninformative_packet_leaves_measurement_weights():
    ps = replace(init_particles(PRIOR, 100, _rng()), step=1)
    z = np.array([150.0, 0.76])
    packet = TransferPacket(np.array([140.0, 0.8]), 1e9 * np.diag([100.0, 1e-5]), for_step=1)
    transferred = primary_update(ps, z, packet, SENSOR)
    measured_only = primary_update(ps, z, None, SENSOR)
    np.testing.assert_allclose(transferred.weights, measured_only.weights, atol=1e-6)


def test_two_particle_product_of_gaussians():
    states = np.array([[100.0, 0.0, 100.0, 0.0], [120.0, 0.0, 90.0, 0.0]])
    ps = ParticleSet(states, uniform_logweights(2), step=1)
    packet = TransferPacket(np.array([145.0, 0.75]), np.diag([25.0, 1e-3]), for_step=1)
    z = np.array([150.0, 0.7])

    updated = primary_update(ps, z, packet, SENSOR)
    oracle = np.array([
        stats.multivariate_normal(measure(x), packet.eta_cov).pdf(packet.eta_mean)
        * stats.multivariate_normal(measure(x), SENSOR.noise_cov).pdf(z)
        for x in states
    ])
    np.testing.assert_allclose(updated.weights, oracle / oracle.sum(), rtol=1e-8)


def test_weight_ratio_equals_likelihood_ratio():
    ps = replace(init_particles(PRIOR, 40, _rng()), step=1)
    packet = TransferPacket(np.array([150.0, 0.77]), np.diag([30.0, 2e-5]), for_step=1)
    z = np.array([152.0, 0.78])
    updated = primary_update(ps, z, packet, SENSOR)

    eta = measure(ps.states)
    log_tl = stats.multivariate_normal(np.zeros(2), packet.eta_cov).logpdf(packet.eta_mean - eta)
    log_z = stats.multivariate_normal(np.zeros(2), SENSOR.noise_cov).logpdf(z - eta)
    expected = (log_tl + log_z) - (log_tl[0] + log_z[0])
    observed = np.log(updated.weights) - np.log(updated.weights[0])
    np.testing.assert_allclose(observed, expected, atol=1e-10)


def test_stale_packet_rejected():
    ps = init_particles(PRIOR, 10, _rng())
    packet = TransferPacket(np.array([140.0, 0.8]), np.eye(2), for_step=3)
    with pytest.raises(StaleTransferPacketError):
        primary_step(ps, np.array([140.0, 0.8]), packet, CV, SENSOR, _rng(1))


def test_channel_holds_one_packet():
    channel = TransferChannel()
    assert channel.receive(1) is None
    first = TransferPacket(np.zeros(2), np.eye(2), for_step=2)
    channel.send(first)
    with pytest.raises(StaleTransferPacketError):
        channel.send(TransferPacket(np.zeros(2), np.eye(2), for_step=3))
    assert channel.receive(2) is first


def test_channel_rejects_wrong_step():
    channel = TransferChannel()
    channel.send(TransferPacket(np.zeros(2), np.eye(2), for_step=2))
    with pytest.raises(StaleTransferPacketError):
        channel.receive(3)


def test_source_step_emits_packet_for_next_step():
    ps = init_particles(PRIOR, 100, _rng())
    ps, estimate, packet = source_step(ps, np.array([150.0, 0.77]), CV, SENSOR_STAR, _rng(1))
    assert ps.step == 1
    assert packet.for_step == 2
    assert np.all(np.linalg.eigvalsh(packet.eta_cov) > 0)


def _paired(config, run_index=0, n_particles=150, channel=None):
    truth = run_truth(config, run_index)
    measurements = run_measurements(config, truth, run_index, config.I_w[0])
    rngs = tl_pf_streams(config, run_index, n_particles)
    return truth, measurements, run_dual(config, truth, measurements, rngs, n_particles, channel=channel)


def _isolated(config, measurements, n_particles=150):
    rng_primary = tl_pf_streams(config, 0, n_particles)[1]
    model = scenario_model(config)
    sensor = scenario_sensors(config, config.I_w[0])[1]
    ps = init_particles(prior_from_config(config), n_particles, rng_primary)
    estimates = []
    for z in measurements.primary:
        ps, estimate = sir_step(ps, z, model, sensor, rng_primary)
        estimates.append(estimate.mean)
    return estimates


def test_single_step_primary_sees_no_packet(small_s2):
    config = replace(small_s2, K=1)
    _, measurements, paired = _paired(config)
    assert len(paired.primary_estimates) == 1
    np.testing.assert_array_equal(paired.primary_estimates[0].mean, _isolated(config, measurements)[0])


def test_transfer_changes_primary_estimates(small_s2):
    config = replace(small_s2, I_w=(1.0,))
    _, measurements, paired = _paired(config)
    isolated = _isolated(config, measurements)

    np.testing.assert_array_equal(paired.primary_estimates[0].mean, isolated[0])
    assert not np.array_equal(paired.primary_estimates[-1].mean, isolated[-1])


def test_dump_and_replay_reproduce_primary(tmp_path, small_s2):
    truth, measurements, original = _paired(small_s2)
    path = tmp_path / "packets.csv"
    dump_packets(path, original.packets[:-1], {"scenario": "S2", "seed": small_s2.master_seed})

    header, packets = load_packets(path)
    assert header["scenario"] == "S2"
    assert [p.for_step for p in packets] == list(range(2, small_s2.K + 1))
    for written, read in zip(original.packets, packets):
        np.testing.assert_array_equal(written.eta_mean, read.eta_mean)
        np.testing.assert_array_equal(written.eta_cov, read.eta_cov)

    _, _, replayed = _paired(small_s2, channel=ReplayChannel(packets))
    for a, b in zip(original.primary_estimates, replayed.primary_estimates):
        np.testing.assert_array_equal(a.mean, b.mean)
    assert replayed.source_estimates == []


def test_measurement_pair_lengths_checked(small_s2):
    truth = run_truth(small_s2, 0)
    short = MeasurementPair(np.zeros((3, 2)), np.zeros((3, 2)))
    with pytest.raises(ValueError):
        run_dual(small_s2, truth, short, tl_pf_streams(small_s2, 0, 10), 10)


def test_bearing_mean_of_cloud_near_pi():
    eta = np.array([[100.0, math.pi - 0.001], [100.0, -math.pi + 0.001]])
    mean, _ = measurement_moments(eta, np.array([0.5, 0.5]))
    assert abs(abs(mean[1]) - math.pi) < 1e-9


def test_analytic_packet_mode_end_to_end(small_s2):
    analytic = replace(small_s2, packet_noise_mode="analytic")
    _, _, verbatim_run = _paired(small_s2)
    _, _, analytic_run = _paired(analytic)
    sensor_star = scenario_sensors(analytic, analytic.I_w[0])[0]

    assert len(analytic_run.packets) == analytic.K
    assert len(analytic_run.primary_estimates) == analytic.K
    for packet in analytic_run.packets:
        assert np.all(np.isfinite(packet.eta_mean))
        assert np.linalg.eigvalsh(packet.eta_cov - sensor_star.noise_cov).min() >= -1e-9
    for estimate in analytic_run.primary_estimates:
        assert np.all(np.isfinite(estimate.mean))

    np.testing.assert_array_equal(analytic_run.primary_estimates[0].mean, verbatim_run.primary_estimates[0].mean)
    assert not np.array_equal(analytic_run.packets[0].eta_cov, verbatim_run.packets[0].eta_cov)
