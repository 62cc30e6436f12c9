"""
Banc de simulation Monte-Carlo: génération de la vérité et des mesures des deux
capteurs, exécution de tous les filtres configurés sur les mêmes données, puis
agrégation des métriques (RMSE par pas, RMSE global, temps par pas).
"""
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from time import perf_counter

import numpy as np

from btl_pf import MeasurementPair, run_dual
from gaussian_baselines import gf_step, init_gaussian_filter, source_gf_packet
from math_core import rng_stream, sample_gaussian
from models import (
    BEARING_INDEX,
    measure,
    process_noise_cov,
    scenario_model,
    scenario_sensors,
    transition,
    wrap_angle,
)
from rmse_analysis import overall_rmse, rmse_per_step
from sir_pf import init_particles, prior_from_config, step as sir_step

POSITION_INDICES = [0, 2]


@dataclass
class RunTrace:
    """Résultat d'un filtre sur un run MC"""
    positions: np.ndarray
    step_ms: np.ndarray
    degenerate_events: int = 0
    mean_ess: float = float('nan')
    jitter_events: int = 0
    source_positions: np.ndarray | None = None


@dataclass
class RunMetrics:
    """Métriques agrégées d'un filtre pour une intensité I_w"""
    filter_id: str
    I_w: float
    n_particles: int | None
    transfer: bool
    rmse_per_step: np.ndarray
    overall_rmse: float
    wall_time_per_step: float
    median_time_per_step: float
    degenerate_weight_events: int = 0
    mean_ess: float = float('nan')
    jitter_events: int = 0
    source_overall_rmse: float | None = None
    points: int | None = None


@dataclass
class ExperimentResult:
    config: object
    metrics: list = field(default_factory=list)
    trajectory: np.ndarray | None = None

    def get(self, filter_id, I_w):
        for metrics in self.metrics:
            if metrics.filter_id == filter_id and metrics.I_w == I_w:
                return metrics
        raise KeyError(f"{filter_id} @ I_w={I_w}")


def generate_truth(config, rng, draw_initial=True):
    """Trajectoire de K+1 états: x₀ (tiré de N(x₀, P₀) ou exact) puis transition + bruit de processus"""
    model = scenario_model(config)
    Q_v = process_noise_cov(model)
    x0 = np.asarray(config.x0, dtype=float)
    truth = np.empty((config.K + 1, model.state_dim))
    truth[0] = sample_gaussian(x0, np.diag(config.P0), rng) if draw_initial else x0
    for k in range(1, config.K + 1):
        truth[k] = transition(model, truth[k - 1]) + sample_gaussian(np.zeros(model.state_dim), Q_v, rng)
    return truth


def generate_measurements(truth, sensor, rng):
    """Mesures bruitées z_k = h(x_k) + w_k pour k = 1..K, gisement replié"""
    clean = measure(truth[1:])
    noisy = clean + sample_gaussian(np.zeros(2), sensor.noise_cov, rng, size=clean.shape[0])
    noisy[:, BEARING_INDEX] = wrap_angle(noisy[:, BEARING_INDEX])
    return noisy


def _positions(estimates):
    return np.array([estimate.mean[POSITION_INDICES] for estimate in estimates])


def _run_isolated_pf(config, spec, z_primary, sensor, rng):
    model = scenario_model(config)
    ps = init_particles(prior_from_config(config), spec.n_particles, rng)
    estimates, step_ms, ess = [], [], []
    for z in z_primary:
        started = perf_counter()
        ps, estimate = sir_step(ps, z, model, sensor, rng)
        step_ms.append((perf_counter() - started) * 1e3)
        estimates.append(estimate)
        ess.append(ps.ess)
    return RunTrace(_positions(estimates), np.array(step_ms), ps.degenerate_events, float(np.mean(ess)))


def _run_tl_pf(config, spec, truth, measurements, I_w, run_index):
    rngs = tl_pf_streams(config, run_index, spec.n_particles)
    result = run_dual(config, truth, measurements, rngs, spec.n_particles, I_w=I_w)
    return RunTrace(
        positions=_positions(result.primary_estimates),
        step_ms=np.array(result.primary_step_ms),
        degenerate_events=result.primary_set.degenerate_events,
        mean_ess=float(np.mean(result.primary_ess)),
        source_positions=_positions(result.source_estimates),
    )


def _run_gaussian(config, spec, measurements, sensors):
    model = scenario_model(config)
    Q_v = process_noise_cov(model)
    sensor_star, sensor = sensors
    prior = prior_from_config(config)
    primary = init_gaussian_filter(prior, spec.kind)
    source = init_gaussian_filter(prior, spec.kind) if spec.transfer else None
    packet = None
    estimates, source_estimates, step_ms = [], [], []

    for z_star, z in zip(measurements.source, measurements.primary):
        started = perf_counter()
        primary = gf_step(primary, z, packet, model, Q_v, sensor)
        step_ms.append((perf_counter() - started) * 1e3)
        estimates.append(primary)
        if source is not None:
            source = gf_step(source, z_star, None, model, Q_v, sensor_star)
            packet = source_gf_packet(source, model, Q_v, measure, sensor_star.noise_cov)
            source_estimates.append(source)

    jitter = primary.jitter_events + (source.jitter_events if source is not None else 0)
    return RunTrace(
        positions=_positions(estimates),
        step_ms=np.array(step_ms),
        jitter_events=jitter,
        source_positions=_positions(source_estimates) if source is not None else None,
    )


def run_truth(config, run_index):
    """Vérité du run; en mode reference, la même trajectoire pour tous les runs"""
    if config.truth_mode == 'reference':
        return generate_truth(config, rng_stream(config.truth_seed, 0, 'shared', 'truth'), draw_initial=False)
    return generate_truth(config, rng_stream(config.master_seed, run_index, 'shared', 'truth'))


def run_measurements(config, truth, run_index, I_w):
    """Paire de mesures du run; mêmes flux pour toutes les intensités I_w"""
    sensor_star, sensor = scenario_sensors(config, I_w)
    return MeasurementPair(
        source=generate_measurements(
            truth, sensor_star, rng_stream(config.master_seed, run_index, 'source', 'measurement')
        ),
        primary=generate_measurements(
            truth, sensor, rng_stream(config.master_seed, run_index, 'primary', 'measurement')
        ),
    )


def tl_pf_streams(config, run_index, n_particles):
    """Flux (source, primaire) d'un TL-PF; le primaire est partagé avec le PF isolé de même N_s"""
    return (
        rng_stream(config.master_seed, run_index, 'source', 'filter', n_particles),
        rng_stream(config.master_seed, run_index, 'primary', 'filter', n_particles),
    )


def run_mc_iteration(config, run_index):
    """Un run MC: une vérité, une paire de mesures par I_w, tous les filtres"""
    truth = run_truth(config, run_index)
    traces = {}

    for I_w in config.I_w:
        sensor_star, sensor = scenario_sensors(config, I_w)
        measurements = run_measurements(config, truth, run_index, I_w)

        for spec in config.filters:
            if spec.kind == 'pf' and spec.transfer:
                trace = _run_tl_pf(config, spec, truth, measurements, I_w, run_index)
            elif spec.kind == 'pf':
                rng = rng_stream(config.master_seed, run_index, 'primary', 'filter', spec.n_particles)
                trace = _run_isolated_pf(config, spec, measurements.primary, sensor, rng)
            else:
                trace = _run_gaussian(config, spec, measurements, (sensor_star, sensor))
            traces[(spec.filter_id, I_w)] = trace

    return truth, traces


def _quiet_iteration(config, run_index):
    with warnings.catch_warnings():
        warnings.simplefilter('ignore')
        return run_mc_iteration(config, run_index)


def run_experiment(config, workers=1, progress=None):
    """Exécute les MC runs et agrège les métriques par (filtre, I_w).

    Les runs sont rassemblés dans l'ordre de leur indice: le résultat ne dépend
    pas du nombre de workers.
    """
    config.validate()
    iteration = partial(_quiet_iteration, config)
    run_indices = range(config.mc)

    truths, collected = [], {}
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outputs = pool.map(iteration, run_indices, chunksize=max(1, config.mc // (4 * workers)))
            for run_index, (truth, traces) in enumerate(outputs):
                _collect(truths, collected, truth, traces)
                if progress:
                    progress(run_index + 1, config.mc)
    else:
        for run_index in run_indices:
            truth, traces = iteration(run_index)
            _collect(truths, collected, truth, traces)
            if progress:
                progress(run_index + 1, config.mc)

    true_positions = np.stack([truth[1:, POSITION_INDICES] for truth in truths])
    result = ExperimentResult(config=config, trajectory=truths[0])
    for spec in config.filters:
        for I_w in config.I_w:
            result.metrics.append(_aggregate(config, spec, I_w, true_positions, collected[(spec.filter_id, I_w)]))
    return result


def _collect(truths, collected, truth, traces):
    truths.append(truth)
    for key, trace in traces.items():
        collected.setdefault(key, []).append(trace)


def _aggregate(config, spec, I_w, true_positions, traces):
    estimated = np.stack([trace.positions for trace in traces])
    rmse = rmse_per_step(true_positions, estimated)
    per_run_ms = np.array([trace.step_ms.mean() for trace in traces])

    source_rmse = None
    if traces[0].source_positions is not None:
        source_rmse = overall_rmse(
            rmse_per_step(true_positions, np.stack([trace.source_positions for trace in traces]))
        )

    return RunMetrics(
        filter_id=spec.filter_id,
        I_w=I_w,
        n_particles=spec.n_particles,
        transfer=spec.transfer,
        rmse_per_step=rmse,
        overall_rmse=overall_rmse(rmse),
        wall_time_per_step=float(per_run_ms.mean()),
        median_time_per_step=float(np.median(per_run_ms)),
        degenerate_weight_events=int(sum(trace.degenerate_events for trace in traces)),
        mean_ess=float(np.mean([trace.mean_ess for trace in traces])),
        jitter_events=int(sum(trace.jitter_events for trace in traces)),
        source_overall_rmse=source_rmse,
        points=spec.points(config.state_dim),
    )
