"""
Filtres gaussiens de référence: UKF (κ = 2) et CKF du 3e degré, isolés ou avec
transfert bayésien. Le transfert est réalisé comme une seconde mise à jour
séquentielle avec la pseudo-mesure η̂*_k de covariance P*_ηη,k, appliquée avant
la mesure réelle.
"""
from dataclasses import dataclass, replace

import numpy as np
from scipy import linalg

from btl_pf import TransferPacket
from config import UKF_KAPPA
from errors import NonPositiveDefiniteError, StaleTransferPacketError
from math_core import cholesky_factor, psd_factor, weighted_moments
from models import BEARING_INDEX, measure, measurement_moments, measurement_residual, transition

UKF = 'ukf'
CKF3 = 'ckf3'


@dataclass(frozen=True)
class SigmaPointSet:
    points: np.ndarray
    weights_mean: np.ndarray
    weights_cov: np.ndarray


@dataclass(frozen=True)
class GaussianFilterState:
    """État d'un filtre UKF/CKF3: moyenne, covariance, compteur de jitter"""
    mean: np.ndarray
    cov: np.ndarray
    kind: str = UKF
    kappa: float = UKF_KAPPA
    step: int = 0
    jitter_events: int = 0


def init_gaussian_filter(prior, kind, kappa=UKF_KAPPA):
    if kind not in (UKF, CKF3):
        raise ValueError(f"Filtre gaussien inconnu: {kind}")
    return GaussianFilterState(mean=np.array(prior.mean, dtype=float), cov=np.array(prior.cov, dtype=float),
                               kind=kind, kappa=kappa)


def _square_root(cov):
    try:
        return cholesky_factor(cov)
    except NonPositiveDefiniteError:
        # covariance semi-définie (nulle, par exemple)
        return psd_factor(cov), True


def sigma_points(mean, cov, kind, kappa=UKF_KAPPA):
    """Points de l'UKF (2n+1, paramètre κ) ou de la règle cubature (2n).

    Retourne (SigmaPointSet, jittered).
    """
    mean = np.asarray(mean, dtype=float)
    n = mean.size
    factor, jittered = _square_root(cov)

    if kind == UKF:
        spread = np.sqrt(n + kappa) * factor.T
        points = np.vstack([mean, mean + spread, mean - spread])
        weights = np.full(2 * n + 1, 1.0 / (2.0 * (n + kappa)))
        weights[0] = kappa / (n + kappa)
    elif kind == CKF3:
        spread = np.sqrt(n) * factor.T
        points = np.vstack([mean + spread, mean - spread])
        weights = np.full(2 * n, 1.0 / (2.0 * n))
    else:
        raise ValueError(f"Filtre gaussien inconnu: {kind}")

    return SigmaPointSet(points, weights, weights.copy()), jittered


def gf_predict(s, model, Q_v):
    """Mise à jour temporelle: propagation des points, moments, + Q_v"""
    sps, jittered = sigma_points(s.mean, s.cov, s.kind, s.kappa)
    propagated = transition(model, sps.points)
    mean, cov = weighted_moments(propagated, sps.weights_mean)
    return replace(
        s,
        mean=mean,
        cov=cov + Q_v,
        step=s.step + 1,
        jitter_events=s.jitter_events + int(jittered),
    )


def gf_update(s, z, h, R, bearing_index=BEARING_INDEX):
    """Mise à jour de mesure par points sigma, innovation repliée.

    P⁺ = P − K P_xzᵀ − P_xz Kᵀ + K P_zz Kᵀ, avec P_zz incluant R.
    """
    sps, jittered = sigma_points(s.mean, s.cov, s.kind, s.kappa)
    predicted = h(sps.points)
    z_mean, P_zz = measurement_moments(predicted, sps.weights_mean, sps.weights_cov, bearing_index)
    P_zz = P_zz + R

    dx = sps.points - s.mean
    dz = measurement_residual(predicted, z_mean, bearing_index)
    P_xz = (dx * sps.weights_cov[:, None]).T @ dz

    factor, jittered_zz = cholesky_factor(P_zz)
    gain = linalg.cho_solve((factor, True), P_xz.T).T
    innovation = measurement_residual(z, z_mean, bearing_index)

    cov = s.cov - gain @ P_xz.T - P_xz @ gain.T + gain @ P_zz @ gain.T

    return replace(
        s,
        mean=s.mean + gain @ innovation,
        cov=0.5 * (cov + cov.T),
        jitter_events=s.jitter_events + int(jittered) + int(jittered_zz),
    )


def gf_tl_update(s, packet, h, bearing_index=BEARING_INDEX):
    """Seconde mise à jour avec la pseudo-mesure transférée (η̂*_k, P*_ηη,k)"""
    if packet.for_step != s.step:
        raise StaleTransferPacketError(
            f"paquet prévu pour le pas {packet.for_step}, filtre au pas {s.step}"
        )
    return gf_update(s, packet.eta_mean, h, packet.eta_cov, bearing_index)


def source_gf_packet(s, model, Q_v, h, Q_star_w, bearing_index=BEARING_INDEX):
    """Prédiction à un pas puis moments dans l'espace des mesures, + Q*_w"""
    predicted = gf_predict(s, model, Q_v)
    sps, _ = sigma_points(predicted.mean, predicted.cov, s.kind, s.kappa)
    eta_mean, eta_cov = measurement_moments(h(sps.points), sps.weights_mean, sps.weights_cov, bearing_index)
    return TransferPacket(eta_mean=eta_mean, eta_cov=eta_cov + Q_star_w, for_step=s.step + 1)


def gf_step(s, z, packet, model, Q_v, sensor, h=measure):
    """Pas complet: prédiction, pseudo-mesure transférée éventuelle, mesure"""
    s = gf_predict(s, model, Q_v)
    if packet is not None:
        s = gf_tl_update(s, packet, h)
    return gf_update(s, z, h, sensor.noise_cov)
