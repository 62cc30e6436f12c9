"""
Modèles de mouvement (vitesse constante, virage coordonné), modèle de mesure
distance/gisement et construction des bruits à intensités asymétriques.
"""
import math
from dataclasses import dataclass

import numpy as np

from config import THRESHOLDS
from errors import DimensionMismatchError, OriginSingularityError

LINEAR_CV = 'linear_cv'
COORDINATED_TURN = 'coordinated_turn'

# index du gisement dans z = [r, ζ]
BEARING_INDEX = 1


@dataclass(frozen=True)
class MotionModel:
    """Modèle de mouvement: type, période T_s et paramètres spectraux (q ou q1, q2)"""
    kind: str
    T_s: float
    q: float
    q2: float = 0.0

    def __post_init__(self):
        if self.kind not in (LINEAR_CV, COORDINATED_TURN):
            raise ValueError(f"Modèle de mouvement inconnu: {self.kind}")
        if self.T_s <= 0:
            raise ValueError("T_s doit être > 0")
        if self.q < 0 or self.q2 < 0:
            raise ValueError("q, q1, q2 doivent être >= 0")

    @property
    def state_dim(self):
        return 4 if self.kind == LINEAR_CV else 5

    @classmethod
    def for_scenario(cls, scenario, T_s, q, q2=0.0):
        if scenario == 'S1':
            return cls(LINEAR_CV, T_s, q)
        return cls(COORDINATED_TURN, T_s, q, q2)


@dataclass(frozen=True)
class SensorModel:
    """Capteur distance/gisement: Q_w = intensité · B_w"""
    base_cov: np.ndarray
    intensity: float

    @property
    def noise_cov(self):
        return self.intensity * self.base_cov


def wrap_angle(angle):
    """Ramène un angle dans (−π, π]"""
    wrapped = np.mod(np.asarray(angle, dtype=float) + math.pi, 2.0 * math.pi) - math.pi
    wrapped = np.where(wrapped == -math.pi, math.pi, wrapped)
    return wrapped if wrapped.ndim else float(wrapped)


def measurement_residual(z, z_pred, bearing_index=BEARING_INDEX):
    """z − z_pred avec le gisement ramené dans (−π, π]"""
    residual = np.asarray(z, dtype=float) - np.asarray(z_pred, dtype=float)
    if bearing_index is not None:
        residual[..., bearing_index] = wrap_angle(residual[..., bearing_index])
    return residual


def measurement_moments(points, weights_mean, weights_cov=None, bearing_index=BEARING_INDEX):
    """Moyenne et dispersion pondérées dans l'espace des mesures.

    Les écarts de gisement sont repliés autour du premier point avant la moyenne.
    """
    points = np.asarray(points, dtype=float)
    weights_mean = np.asarray(weights_mean, dtype=float)
    weights_cov = weights_mean if weights_cov is None else np.asarray(weights_cov, dtype=float)

    reference = points[0]
    deviations = measurement_residual(points, reference, bearing_index)
    mean = reference + weights_mean @ deviations
    if bearing_index is not None:
        mean[bearing_index] = wrap_angle(mean[bearing_index])
    centered = measurement_residual(points, mean, bearing_index)
    cov = (centered * weights_cov[:, None]).T @ centered
    return mean, 0.5 * (cov + cov.T)


def _turn_coefficients(omega, T_s):
    """sin(ΩT)/Ω et (1−cos(ΩT))/Ω avec leur développement de Taylor près de Ω = 0"""
    omega = np.asarray(omega, dtype=float)
    small = np.abs(omega) < THRESHOLDS['omega_epsilon']
    safe = np.where(small, 1.0, omega)
    angle = safe * T_s
    sin_term = np.where(small, T_s - omega ** 2 * T_s ** 3 / 6.0, np.sin(angle) / safe)
    cos_term = np.where(small, omega * T_s ** 2 / 2.0, 2.0 * np.sin(angle / 2.0) ** 2 / safe)
    return sin_term, cos_term


def transition(model, x):
    """Moyenne sans bruit f(x), vectorisée sur les lignes de x"""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != model.state_dim:
        raise DimensionMismatchError(
            f"état de dimension {x.shape[-1]} pour un modèle {model.kind} ({model.state_dim})"
        )
    T = model.T_s
    px, vx, py, vy = x[..., 0], x[..., 1], x[..., 2], x[..., 3]
    out = np.empty_like(x)

    if model.kind == LINEAR_CV:
        out[..., 0] = px + T * vx
        out[..., 1] = vx
        out[..., 2] = py + T * vy
        out[..., 3] = vy
        return out

    omega = x[..., 4]
    sin_term, cos_term = _turn_coefficients(omega, T)
    cos_wt = np.cos(omega * T)
    sin_wt = np.sin(omega * T)
    out[..., 0] = px + sin_term * vx - cos_term * vy
    out[..., 1] = cos_wt * vx - sin_wt * vy
    out[..., 2] = py + cos_term * vx + sin_term * vy
    out[..., 3] = sin_wt * vx + cos_wt * vy
    out[..., 4] = omega
    return out


def process_noise_cov(model):
    """Q_v par blocs (q·T⁴/4, q·T³/2, q·T²), plus q2·T_s pour Ω"""
    T = model.T_s
    block = model.q * np.array([
        [T ** 4 / 4.0, T ** 3 / 2.0],
        [T ** 3 / 2.0, T ** 2],
    ])
    cov = np.zeros((model.state_dim, model.state_dim))
    cov[0:2, 0:2] = block
    cov[2:4, 2:4] = block
    if model.kind == COORDINATED_TURN:
        cov[4, 4] = model.q2 * T
    return cov


def measure(x):
    """Mesure sans bruit h(x) = [r, ζ], vectorisée"""
    x = np.asarray(x, dtype=float)
    px, py = x[..., 0], x[..., 2]
    if np.any((px == 0.0) & (py == 0.0)):
        raise OriginSingularityError("position à l'origine: gisement indéfini")
    return np.stack([np.hypot(px, py), wrap_angle(np.arctan2(py, px))], axis=-1)


def make_sensor_pair(I_source, I_primary, sigma_r, sigma_zeta):
    """Capteurs source et primaire partageant B_w = diag(σ_r², σ_ζ²)"""
    if I_source <= 0 or I_primary <= 0:
        raise ValueError("Les intensités de bruit doivent être > 0")
    if sigma_r <= 0 or sigma_zeta <= 0:
        raise ValueError("σ_r et σ_ζ doivent être > 0")
    base_cov = np.diag([sigma_r ** 2, sigma_zeta ** 2])
    return SensorModel(base_cov, float(I_source)), SensorModel(base_cov, float(I_primary))


def scenario_model(config):
    """Modèle de mouvement décrit par une ScenarioConfig"""
    return MotionModel.for_scenario(config.scenario, config.T_s, config.q, config.q2)


def scenario_sensors(config, I_w):
    """Paire (source, primaire) pour l'intensité primaire I_w"""
    return make_sensor_pair(config.I_source, I_w, config.sigma_r, config.sigma_zeta)
