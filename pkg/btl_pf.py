"""
Filtre particulaire à transfert bayésien (TL-PF).

Le filtre source (capteur peu bruité) exporte à chaque pas la densité de
l'observation prédite η*_{k+1} sous forme gaussienne (η̂*, P*_ηη). Le filtre
primaire (capteur bruité) l'utilise comme une vraisemblance supplémentaire
avant sa propre vraisemblance de mesure. Le transfert est unidirectionnel.
"""
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import pandas as pd

from config import PACKET_FLOAT_FORMAT
from errors import LengthMismatchError, StaleTransferPacketError
from math_core import gaussian_logpdf, sample_gaussian
from models import (
    BEARING_INDEX,
    measure,
    measurement_moments,
    measurement_residual,
    process_noise_cov,
    scenario_model,
    scenario_sensors,
    transition,
    wrap_angle,
)
from sir_pf import (
    init_particles,
    measurement_loglik,
    predict,
    prior_from_config,
    resample,
    reweight,
    step as sir_step,
    summarize,
)

PACKET_COLUMNS = ['k', 'eta_r', 'eta_zeta', 'P11', 'P12', 'P22']


@dataclass(frozen=True)
class TransferPacket:
    """(η̂*_{k+1}, P*_ηη,k+1) calculés par la source au pas k, consommés au pas k+1"""
    eta_mean: np.ndarray
    eta_cov: np.ndarray
    for_step: int


@dataclass(frozen=True)
class PredictedObservationCloud:
    """Particules d'observation prédite η*⁽ⁱ⁾_{k+1}, poids uniformes 1/N_s"""
    eta_particles: np.ndarray
    for_step: int

    @property
    def weights(self):
        n = self.eta_particles.shape[0]
        return np.full(n, 1.0 / n)


@dataclass(frozen=True)
class MeasurementPair:
    """Séries de mesures (K, 2) des capteurs source et primaire"""
    source: np.ndarray
    primary: np.ndarray


@dataclass
class DualTrackResult:
    source_estimates: list = field(default_factory=list)
    primary_estimates: list = field(default_factory=list)
    packets: list = field(default_factory=list)
    primary_step_ms: list = field(default_factory=list)
    primary_ess: list = field(default_factory=list)
    source_step_ms: list = field(default_factory=list)
    source_set: object = None
    primary_set: object = None


class TransferChannel:
    """File à une place entre source et primaire, étiquetée par pas de temps"""

    def __init__(self):
        self._slot = None

    def send(self, packet):
        if self._slot is not None:
            raise StaleTransferPacketError(
                f"paquet du pas {self._slot.for_step} jamais consommé"
            )
        self._slot = packet

    def receive(self, step):
        packet, self._slot = self._slot, None
        if packet is not None and packet.for_step != step:
            raise StaleTransferPacketError(
                f"paquet prévu pour le pas {packet.for_step}, reçu au pas {step}"
            )
        return packet


class ReplayChannel:
    """Canal alimenté par un fichier de paquets enregistrés"""

    def __init__(self, packets):
        self._packets = {packet.for_step: packet for packet in packets}

    def send(self, packet):
        pass

    def receive(self, step):
        return self._packets.get(step)


def predict_observations(ps, model, sensor_star, rng, noise_mode='verbatim'):
    """Tirage anticipé x*_{k+1}⁽ⁱ⁾ puis η*_{k+1}⁽ⁱ⁾; ps n'est pas modifié"""
    Q_v = process_noise_cov(model)
    lookahead = transition(model, ps.states) + sample_gaussian(
        np.zeros(model.state_dim), Q_v, rng, size=ps.n_particles
    )
    eta = measure(lookahead)
    if noise_mode == 'verbatim':
        eta = eta + sample_gaussian(np.zeros(2), sensor_star.noise_cov, rng, size=ps.n_particles)
        eta[:, BEARING_INDEX] = wrap_angle(eta[:, BEARING_INDEX])
    return PredictedObservationCloud(eta_particles=eta, for_step=ps.step + 1)


def packet_from_cloud(cloud, sensor_star):
    """Moyenne des η; covariance = dispersion des η + Q*_w"""
    mean, scatter = measurement_moments(cloud.eta_particles, cloud.weights)
    return TransferPacket(eta_mean=mean, eta_cov=scatter + sensor_star.noise_cov, for_step=cloud.for_step)


def source_step(ps, z_star, model, sensor_star, rng, noise_mode='verbatim'):
    """Pas du filtre source: SIR sur z*_k puis paquet pour le pas k+1"""
    ps, estimate = sir_step(ps, z_star, model, sensor_star, rng)
    cloud = predict_observations(ps, model, sensor_star, rng, noise_mode)
    return ps, estimate, packet_from_cloud(cloud, sensor_star)


def transfer_loglik(states, packet):
    """log p(η̂*_k | xᵢ) = log N(wrap(η̂*_k − h(xᵢ)); 0, P*_ηη,k)"""
    return gaussian_logpdf(measurement_residual(packet.eta_mean, measure(states)), packet.eta_cov)


def primary_update(ps, z, packet, sensor):
    """Poids TL w^η ∝ w p(η*|x), puis w ∝ w^η p(z|x), puis normalisation"""
    if packet is not None:
        ps = replace(ps, logw=ps.logw + transfer_loglik(ps.states, packet))
    return reweight(ps, measurement_loglik(ps.states, z, sensor.noise_cov))


def primary_step(ps, z, packet, model, sensor, rng):
    """Pas du filtre primaire; sans paquet, identique au pas SIR isolé"""
    current = ps.step + 1
    if packet is not None and packet.for_step != current:
        raise StaleTransferPacketError(
            f"paquet prévu pour le pas {packet.for_step}, filtre primaire au pas {current}"
        )
    Q_v = process_noise_cov(model)
    ps = predict(ps, model, Q_v, rng)
    ps = primary_update(ps, z, packet, sensor)
    ps = resample(ps, rng)
    return ps, summarize(ps, Q_v)


def run_dual(config, truth, measurements, rngs, n_particles, I_w=None, channel=None):
    """Exécute la paire source/primaire sur K pas avec un pipeline à un pas.

    Au pas k, la source produit le paquet du pas k+1 et le primaire consomme
    celui produit au pas k−1 (aucun paquet au pas 1). Un ReplayChannel permet
    de rejouer des paquets enregistrés à la place de la source.
    """
    K = measurements.primary.shape[0]
    if measurements.source.shape[0] != K or truth.shape[0] != K + 1:
        raise LengthMismatchError(
            f"vérité {truth.shape[0]} états, mesures source {measurements.source.shape[0]}, "
            f"primaire {K} (attendu K+1, K, K)"
        )

    rng_source, rng_primary = rngs
    model = scenario_model(config)
    sensor_star, sensor = scenario_sensors(config, config.I_w[0] if I_w is None else I_w)
    prior = prior_from_config(config)
    replaying = isinstance(channel, ReplayChannel)
    channel = channel or TransferChannel()

    result = DualTrackResult()
    primary_set = init_particles(prior, n_particles, rng_primary)
    source_set = None if replaying else init_particles(prior, n_particles, rng_source)

    for k in range(1, K + 1):
        packet = channel.receive(k)

        if not replaying:
            started = time.perf_counter()
            source_set, source_estimate, next_packet = source_step(
                source_set, measurements.source[k - 1], model, sensor_star, rng_source,
                config.packet_noise_mode,
            )
            result.source_step_ms.append((time.perf_counter() - started) * 1e3)
            result.source_estimates.append(source_estimate)
            result.packets.append(next_packet)
            if k < K:
                channel.send(next_packet)

        started = time.perf_counter()
        primary_set, primary_estimate = primary_step(
            primary_set, measurements.primary[k - 1], packet, model, sensor, rng_primary
        )
        result.primary_step_ms.append((time.perf_counter() - started) * 1e3)
        result.primary_estimates.append(primary_estimate)
        result.primary_ess.append(primary_set.ess)

    result.source_set = source_set
    result.primary_set = primary_set
    return result


def packets_to_frame(packets):
    return pd.DataFrame(
        [
            [p.for_step, p.eta_mean[0], p.eta_mean[1], p.eta_cov[0, 0], p.eta_cov[0, 1], p.eta_cov[1, 1]]
            for p in packets
        ],
        columns=PACKET_COLUMNS,
    )


def dump_packets(path, packets, header=None):
    """Écrit les paquets: lignes d'en-tête '# clé=valeur' puis un enregistrement par pas"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='') as handle:
        for key, value in (header or {}).items():
            handle.write(f"# {key}={value}\n")
        packets_to_frame(packets).to_csv(handle, index=False, float_format=PACKET_FLOAT_FORMAT, lineterminator='\n')


def load_packets(path):
    """Relit un fichier de paquets; retourne (en-tête, paquets)"""
    header = {}
    with open(path, encoding='utf-8') as handle:
        for line in handle:
            if not line.startswith('#'):
                break
            key, _, value = line[1:].strip().partition('=')
            header[key.strip()] = value.strip()

    frame = pd.read_csv(path, comment='#', skipinitialspace=True, float_precision='round_trip')
    missing = set(PACKET_COLUMNS) - set(frame.columns)
    if missing:
        raise ValueError(f"colonnes manquantes dans {path}: {sorted(missing)}")

    packets = []
    for row in frame.itertuples(index=False):
        cov = np.array([[row.P11, row.P12], [row.P12, row.P22]])
        packets.append(TransferPacket(np.array([row.eta_r, row.eta_zeta]), cov, int(row.k)))
    return header, packets
