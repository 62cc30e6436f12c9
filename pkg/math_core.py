"""
Noyaux numériques partagés par tous les filtres: densité gaussienne, tirages,
normalisation des log-poids, rééchantillonnage systématique et moments pondérés.
"""
import math
import warnings

import numpy as np
from scipy import linalg
from scipy.special import logsumexp

from config import THRESHOLDS, STREAM_SENSORS, STREAM_PURPOSES
from errors import (
    AllWeightsDegenerateError,
    CovarianceJitterWarning,
    DimensionMismatchError,
    EmptyInputError,
    InvalidWeightsError,
    NonPositiveDefiniteError,
)

LOG_2PI = math.log(2.0 * math.pi)


def rng_stream(master_seed, run_index, sensor, purpose, variant=0):
    """Flux Philox indépendant pour un triplet (run MC, capteur, usage)"""
    seed_seq = np.random.SeedSequence(
        master_seed,
        spawn_key=(run_index, STREAM_SENSORS[sensor], STREAM_PURPOSES[purpose], variant),
    )
    return np.random.Generator(np.random.Philox(seed_seq))


def cholesky_factor(cov):
    """Facteur de Cholesky inférieur; un seul essai avec jitter avant d'échouer.

    Retourne (L, jittered).
    """
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    try:
        return linalg.cholesky(cov, lower=True), False
    except (linalg.LinAlgError, ValueError):
        pass

    n = cov.shape[0]
    jitter = THRESHOLDS['cholesky_jitter'] * np.trace(cov) / n
    try:
        factor = linalg.cholesky(cov + jitter * np.eye(n), lower=True)
    except (linalg.LinAlgError, ValueError):
        raise NonPositiveDefiniteError(
            f"Cholesky impossible même après jitter (trace={np.trace(cov):.3g})"
        ) from None
    warnings.warn(f"jitter {jitter:.3g} ajouté à la diagonale", CovarianceJitterWarning, stacklevel=2)
    return factor, True


def psd_factor(cov):
    """Facteur F tel que F Fᵀ = cov pour une covariance semi-définie positive"""
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    try:
        return linalg.cholesky(cov, lower=True)
    except (linalg.LinAlgError, ValueError):
        pass
    if not np.all(np.isfinite(cov)):
        raise NonPositiveDefiniteError("covariance non finie")

    # matrices singulières (Q_v du scénario 1, covariance nulle)
    eigvals, eigvecs = linalg.eigh(0.5 * (cov + cov.T))
    scale = max(1.0, float(np.max(np.abs(eigvals))))
    if eigvals.min() < -THRESHOLDS['symmetry_tolerance'] * scale:
        raise NonPositiveDefiniteError(f"valeur propre négative: {eigvals.min():.3g}")
    return eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))


def gaussian_logpdf(residual, cov):
    """Log-densité N(r; 0, cov), vectorisée sur la première dimension de r"""
    factor, _ = cholesky_factor(cov)
    n = factor.shape[0]
    r = np.asarray(residual, dtype=float)
    if r.shape[-1] != n:
        raise DimensionMismatchError(f"résidu de dimension {r.shape[-1]}, covariance {n}x{n}")

    solved = linalg.solve_triangular(factor, r.reshape(-1, n).T, lower=True)
    mahalanobis = np.sum(solved ** 2, axis=0)
    log_det = 2.0 * np.sum(np.log(np.diag(factor)))
    values = -0.5 * (n * LOG_2PI + log_det + mahalanobis)
    return float(values[0]) if r.ndim == 1 else values


def sample_gaussian(mean, cov, rng, size=None):
    """Tire mean + L·u avec u ~ N(0, I) issu du flux rng"""
    mean = np.asarray(mean, dtype=float)
    factor = psd_factor(cov)
    n = factor.shape[0]
    if mean.shape[-1] != n:
        raise DimensionMismatchError(f"moyenne de dimension {mean.shape[-1]}, covariance {n}x{n}")
    if size is None:
        return mean + factor @ rng.standard_normal(n)
    return mean + rng.standard_normal((size, n)) @ factor.T


def normalize_logweights(logw):
    """Poids normalisés (échelle linéaire) à partir de log-poids non normalisés"""
    logw = np.asarray(logw, dtype=float)
    if logw.size == 0:
        raise EmptyInputError("aucun log-poids")
    if np.any(np.isposinf(logw)):
        raise InvalidWeightsError("log-poids infini positif")

    clean = np.where(np.isnan(logw), -np.inf, logw)
    if not np.any(np.isfinite(clean)):
        raise AllWeightsDegenerateError("tous les log-poids sont -inf ou NaN")

    weights = np.exp(clean - logsumexp(clean))
    return weights / weights.sum()


def effective_sample_size(weights):
    weights = np.asarray(weights, dtype=float)
    return 1.0 / np.sum(weights ** 2)


def systematic_resample(normalized_weights, n_out, u0):
    """Indices d'ancêtres aux positions (j + u0)/n_out sur la somme cumulée"""
    weights = np.asarray(normalized_weights, dtype=float)
    if weights.ndim != 1 or weights.size == 0:
        raise EmptyInputError("vecteur de poids vide")
    if np.any(weights < 0) or not np.all(np.isfinite(weights)):
        raise InvalidWeightsError("poids négatifs ou non finis")
    if abs(weights.sum() - 1.0) > THRESHOLDS['weights_sum_tolerance']:
        raise InvalidWeightsError(f"somme des poids = {weights.sum():.12g}")
    if n_out < 1:
        raise ValueError("n_out doit être >= 1")
    if not 0.0 <= u0 < 1.0:
        raise ValueError(f"u0 hors de [0, 1): {u0}")

    positions = (np.arange(n_out) + u0) / n_out
    cumulative = np.cumsum(weights)
    cumulative[-1] = 1.0
    indices = np.searchsorted(cumulative, positions, side='right')
    return np.minimum(indices, weights.size - 1)


def weighted_moments(particles, weights):
    """Moyenne et covariance pondérées d'un nuage de points"""
    particles = np.asarray(particles, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if particles.size == 0 or weights.size == 0:
        raise EmptyInputError("nuage de particules vide")
    if particles.ndim == 1:
        particles = particles[:, None]
    if particles.shape[0] != weights.size:
        raise DimensionMismatchError(
            f"{particles.shape[0]} particules pour {weights.size} poids"
        )

    # écarts au premier point: un nuage sans dispersion donne une covariance nulle exacte
    reference = particles[0]
    deviations = particles - reference
    offset = weights @ deviations
    centered = deviations - offset
    cov = (centered * weights[:, None]).T @ centered
    return reference + offset, 0.5 * (cov + cov.T)
