"""
Vérifications rapides des briques numériques contre des oracles indépendants,
sans dépendre de pytest (sous-commande `selftest`)
"""
import math

import numpy as np
from scipy import stats

from btl_pf import TransferPacket, primary_update
from gaussian_baselines import CKF3, UKF, gf_update, init_gaussian_filter
from math_core import (
    gaussian_logpdf,
    normalize_logweights,
    rng_stream,
    sample_gaussian,
    systematic_resample,
    weighted_moments,
)
from models import (
    COORDINATED_TURN,
    LINEAR_CV,
    MotionModel,
    SensorModel,
    measure,
    process_noise_cov,
    transition,
    wrap_angle,
)
from sir_pf import ParticleSet, StateGaussian, uniform_logweights


def check_scalar_logpdf():
    expected = stats.norm(loc=0.0, scale=2.0).logpdf(2.0)
    return math.isclose(gaussian_logpdf(np.array([2.0]), np.array([[4.0]])), expected, rel_tol=1e-12)


def check_normalize():
    return np.allclose(normalize_logweights(np.log([1.0, 3.0])), [0.25, 0.75], atol=1e-15)


def check_systematic_resample():
    return systematic_resample(np.array([0.5, 0.5]), 4, 0.1).tolist() == [0, 0, 1, 1]


def check_resample_counts():
    counts = [
        np.count_nonzero(systematic_resample(np.array([0.1, 0.9]), 10, u0) == 1)
        for u0 in np.linspace(0.0, 0.999, 200)
    ]
    return min(counts) >= 8 and max(counts) <= 10


def check_weighted_moments():
    particles = np.random.default_rng(3).normal(size=(5, 3))
    weights = np.full(5, 0.2)
    mean, cov = weighted_moments(particles, weights)
    naive_mean = particles.sum(axis=0) / 5
    naive_cov = sum(np.outer(p - naive_mean, p - naive_mean) for p in particles) / 5
    return np.allclose(mean, naive_mean, atol=1e-12) and np.allclose(cov, naive_cov, atol=1e-12)


def check_sampling_golden():
    mean = np.array([1.0, -2.0])
    draw = sample_gaussian(mean, np.eye(2), rng_stream(11, 0, 'shared', 'truth'))
    normal = rng_stream(11, 0, 'shared', 'truth').standard_normal(2)
    return np.array_equal(draw, mean + normal)


def check_turn_rotation():
    omega, T_s = math.pi / 2, 1.0
    x = np.array([0.0, 1.0, 0.0, 0.0, omega])
    s, c = math.sin(omega * T_s), math.cos(omega * T_s)
    expected = np.array([
        s / omega * x[1] - (1 - c) / omega * x[3],
        c * x[1] - s * x[3],
        (1 - c) / omega * x[1] + s / omega * x[3],
        s * x[1] + c * x[3],
        omega,
    ])
    return np.allclose(transition(MotionModel(COORDINATED_TURN, T_s, 0.1, 0.01), x), expected, atol=1e-12)


def check_process_noise_block():
    Q = process_noise_cov(MotionModel(LINEAR_CV, 1.0, 0.1))
    return np.allclose(Q[:2, :2], [[0.025, 0.05], [0.05, 0.1]], atol=1e-12)


def check_measure_start():
    r, zeta = measure(np.array([1000.0, 300.0, 1000.0, 0.0, 0.0]))
    return math.isclose(r, 1414.21356, rel_tol=1e-8) and math.isclose(zeta, 0.785398, abs_tol=1e-6)


def check_bearing_wrap():
    return math.isclose(wrap_angle((math.pi - 0.01) - (-math.pi + 0.01)), -0.02, abs_tol=1e-12)


def check_transfer_product():
    states = np.array([[100.0, 0.0, 100.0, 0.0], [120.0, 0.0, 90.0, 0.0]])
    ps = ParticleSet(states=states, logw=uniform_logweights(2), step=1)
    packet = TransferPacket(np.array([145.0, 0.75]), np.diag([25.0, 1e-3]), for_step=1)
    sensor = SensorModel(np.diag([100.0, 1e-5]), 4.0)
    z = np.array([150.0, 0.7])

    updated = primary_update(ps, z, packet, sensor)
    oracle = []
    for x in states:
        eta = measure(x)
        tl = stats.multivariate_normal(eta, packet.eta_cov).pdf(packet.eta_mean)
        lik = stats.multivariate_normal(eta, sensor.noise_cov).pdf(z)
        oracle.append(tl * lik)
    oracle = np.array(oracle) / np.sum(oracle)
    return np.allclose(updated.weights, oracle, rtol=1e-8, atol=1e-300)


def check_linear_kalman():
    prior = StateGaussian(np.array([1.0, 2.0]), np.array([[2.0, 0.3], [0.3, 1.0]]))
    H = np.array([[1.0, 0.5], [0.0, 1.0]])
    R = np.diag([0.5, 0.2])
    z = np.array([2.5, 1.7])

    S = H @ prior.cov @ H.T + R
    gain = prior.cov @ H.T @ np.linalg.inv(S)
    mean = prior.mean + gain @ (z - H @ prior.mean)
    cov = (np.eye(2) - gain @ H) @ prior.cov

    ok = True
    for kind in (UKF, CKF3):
        state = gf_update(init_gaussian_filter(prior, kind), z, lambda x: x @ H.T, R, bearing_index=None)
        ok = ok and np.allclose(state.mean, mean, atol=1e-8) and np.allclose(state.cov, cov, atol=1e-8)
    return ok


CHECKS = [
    ("log-densité scalaire", check_scalar_logpdf),
    ("normalisation log-poids", check_normalize),
    ("rééchantillonnage systématique", check_systematic_resample),
    ("nombre de copies attendu", check_resample_counts),
    ("moments pondérés", check_weighted_moments),
    ("tirage gaussien reproductible", check_sampling_golden),
    ("virage coordonné", check_turn_rotation),
    ("bruit de processus", check_process_noise_block),
    ("mesure au point de départ", check_measure_start),
    ("repliement du gisement", check_bearing_wrap),
    ("poids avec transfert", check_transfer_product),
    ("UKF/CKF3 contre Kalman linéaire", check_linear_kalman),
]


def run_selftest():
    """Exécute toutes les vérifications; True si toutes passent"""
    print("Vérification des briques numériques...")
    print("-" * 40)

    failed = []
    for name, check in CHECKS:
        try:
            ok = bool(check())
        except Exception as e:
            ok = False
            name = f"{name} ({type(e).__name__}: {e})"
        print(f"{'✓' if ok else '✗'} {name}")
        if not ok:
            failed.append(name)

    if failed:
        print(f"\n✗ {len(failed)} vérification(s) en échec sur {len(CHECKS)}")
    else:
        print(f"\n✓ Les {len(CHECKS)} vérifications sont passées")
    return not failed
