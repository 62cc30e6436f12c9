"""
Filtre particulaire SIR isolé (sans transfert): proposition par l'a priori de
transition, pondération par la vraisemblance de mesure, rééchantillonnage
systématique à chaque pas et résumé gaussien du postérieur.
"""
import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from errors import AllWeightsDegenerateError, DegenerateWeightsWarning
from math_core import (
    effective_sample_size,
    gaussian_logpdf,
    normalize_logweights,
    sample_gaussian,
    systematic_resample,
    weighted_moments,
)
from models import measure, measurement_residual, process_noise_cov, transition


@dataclass(frozen=True)
class StateGaussian:
    """Résumé gaussien N(mean, cov) d'un postérieur"""
    mean: np.ndarray
    cov: np.ndarray


@dataclass(frozen=True)
class ParticleSet:
    """N_s particules d'état et leurs log-poids normalisés au pas k"""
    states: np.ndarray
    logw: np.ndarray
    step: int = 0
    ess: float | None = None
    degenerate_events: int = 0

    @property
    def n_particles(self):
        return self.states.shape[0]

    @property
    def weights(self):
        return normalize_logweights(self.logw)


def uniform_logweights(n_particles):
    return np.full(n_particles, -math.log(n_particles))


def init_particles(prior, n_particles, rng):
    """Particules i.i.d. tirées de N(x₀, P₀), poids uniformes"""
    if n_particles < 1:
        raise ValueError("N_s doit être >= 1")
    states = sample_gaussian(prior.mean, prior.cov, rng, size=n_particles)
    return ParticleSet(states=states, logw=uniform_logweights(n_particles))


def predict(ps, model, Q_v, rng):
    """x_k⁽ⁱ⁾ ~ p(x_k | x_{k−1}⁽ⁱ⁾): transition plus bruit de processus"""
    noise = sample_gaussian(np.zeros(model.state_dim), Q_v, rng, size=ps.n_particles)
    return replace(ps, states=transition(model, ps.states) + noise, step=ps.step + 1)


def measurement_loglik(states, z, cov):
    """log N(wrap(z − h(xᵢ)); 0, cov) pour chaque particule"""
    return gaussian_logpdf(measurement_residual(z, measure(states)), cov)


def reweight(ps, loglik):
    """Ajoute des log-vraisemblances aux log-poids puis normalise.

    Poids entièrement dégénérés: retour aux poids uniformes, événement compté.
    """
    try:
        weights = normalize_logweights(ps.logw + loglik)
    except AllWeightsDegenerateError:
        warnings.warn(
            f"poids dégénérés au pas {ps.step}: remise à l'uniforme",
            DegenerateWeightsWarning,
            stacklevel=2,
        )
        return replace(
            ps,
            logw=uniform_logweights(ps.n_particles),
            degenerate_events=ps.degenerate_events + 1,
        )
    with np.errstate(divide='ignore'):
        return replace(ps, logw=np.log(weights))


def update_measurement(ps, z, sensor):
    return reweight(ps, measurement_loglik(ps.states, z, sensor.noise_cov))


def resample(ps, rng):
    """Rééchantillonnage systématique; N_eff est mémorisé avant la remise à 1/N_s"""
    weights = ps.weights
    u0 = rng.uniform()
    ancestors = systematic_resample(weights, ps.n_particles, u0)
    return replace(
        ps,
        states=ps.states[ancestors],
        logw=uniform_logweights(ps.n_particles),
        ess=float(effective_sample_size(weights)),
    )


def summarize(ps, Q_add):
    """Moyenne des particules; covariance = dispersion + Q_add"""
    mean, scatter = weighted_moments(ps.states, ps.weights)
    return StateGaussian(mean=mean, cov=scatter + Q_add)


def step(ps, z, model, sensor, rng):
    """Un pas SIR complet: prédiction, mise à jour, rééchantillonnage, résumé"""
    Q_v = process_noise_cov(model)
    ps = predict(ps, model, Q_v, rng)
    ps = update_measurement(ps, z, sensor)
    ps = resample(ps, rng)
    return ps, summarize(ps, Q_v)


def prior_from_config(config):
    """N(x₀, diag(P₀)) de la configuration"""
    return StateGaussian(mean=np.asarray(config.x0, dtype=float), cov=np.diag(np.asarray(config.P0, dtype=float)))
