"""
Configuration du simulateur de poursuite à double capteur (filtres TL-PF, UKF, CKF)
"""
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path

from errors import ConfigValidationError

__version__ = "1.0.0"

# Chemins du projet
BASE_DIR = Path(__file__).parent
RESULTS_DIR = BASE_DIR / "resultats"

# Paramètres nominaux des scénarios et initialisations
SCENARIO_DEFAULTS = {
    'S1': {
        'K': 100,
        'T_s': 1.0,
        'q': 0.1,           # m²/s⁴
        'q2': 0.0,
        'sigma_r': 10.0,    # m
        'sigma_zeta': math.sqrt(10) * 1e-3,  # rad
        'I_source': 1.0,
        'I_w': (4.0,),
        'x0': (100.0, 10.0, 100.0, 10.0),
        'P0': (50.0, 1.0, 50.0, 1.0),
    },
    'S2': {
        'K': 100,
        'T_s': 1.0,
        'q': 0.1,           # q1, m²/s⁴
        'q2': 1.75e-2,      # rad²/s³
        'sigma_r': 10.0,
        'sigma_zeta': math.sqrt(10) * 1e-3,
        'I_source': 1.0,
        'I_w': (4.0,),
        'x0': (1000.0, 300.0, 1000.0, 0.0, math.radians(-3.0)),
        'P0': (100.0, 10.0, 100.0, 10.0, 100e-3),
    },
}

# Échelle "bureau" par défaut
DEFAULT_MC = 500
DEFAULT_FILTERS = "pf:3000,tl-pf:3000"
DEFAULT_PACKET_NOISE_MODE = "verbatim"
PACKET_NOISE_MODES = ("verbatim", "analytic")

# Vérité: trajectoire de référence unique partant de x₀ (reference) ou tirée par run (per_run)
DEFAULT_TRUTH_MODE = "reference"
TRUTH_MODES = ("reference", "per_run")
DEFAULT_TRUTH_SEED = 0

# Seuils numériques
THRESHOLDS = {
    'omega_epsilon': 1e-6,        # rad/s, limite analytique du virage coordonné
    'cholesky_jitter': 1e-9,      # fraction de trace(cov)/n ajoutée à la diagonale
    'weights_sum_tolerance': 1e-9,
    'symmetry_tolerance': 1e-9,
}

# Identifiants des flux aléatoires (run, capteur, usage, variante)
STREAM_SENSORS = {
    'shared': 0,
    'source': 1,
    'primary': 2,
}

STREAM_PURPOSES = {
    'truth': 0,
    'measurement': 1,
    'filter': 2,
}

# Sorties CSV
CSV_FLOAT_FORMAT = "%#.6g"
PACKET_FLOAT_FORMAT = "%.17g"

CSV_HEADERS = {
    'rmse_curve': ('k', 'filter_id', 'I_w', 'rmse_m'),
    'overall': ('filter_id', 'I_w', 'N_s', 'overall_rmse_m', 'time_per_step_ms', 'isolated_or_tl'),
    'delta': ('delta_Iw', 'filter_id', 'delta_rmse_m'),
    'trajectory': ('k', 'x_m', 'y_m'),
    'timing': ('filter_id', 'I_w', 'N_s', 'mean_ms', 'median_ms'),
}

# Filtres reconnus; points = particules (pf), 2n (ckf3) ou 2n+1 (ukf)
FILTER_KINDS = ('pf', 'ukf', 'ckf3')
UKF_KAPPA = 2.0


@dataclass(frozen=True)
class FilterSpec:
    """Un filtre du banc d'essai: type, transfert ou non, nombre de particules"""
    kind: str
    transfer: bool = False
    n_particles: int | None = None

    @property
    def filter_id(self):
        prefix = "tl-" if self.transfer else ""
        if self.kind == 'pf':
            return f"{prefix}pf:{self.n_particles}"
        return f"{prefix}{self.kind}"

    @property
    def base_id(self):
        """Identifiant du filtre isolé correspondant"""
        return FilterSpec(self.kind, False, self.n_particles).filter_id

    def points(self, state_dim):
        if self.kind == 'pf':
            return self.n_particles
        if self.kind == 'ckf3':
            return 2 * state_dim
        return 2 * state_dim + 1

    @classmethod
    def parse(cls, token):
        token = token.strip().lower()
        transfer = token.startswith("tl-")
        if transfer:
            token = token[3:]
        kind, _, count = token.partition(":")
        if kind not in FILTER_KINDS:
            raise ConfigValidationError(f"Filtre inconnu: '{token}'")
        if kind == 'pf':
            try:
                n_particles = int(count)
            except ValueError:
                raise ConfigValidationError(f"Nombre de particules invalide pour '{token}'") from None
            if n_particles < 1:
                raise ConfigValidationError(f"N_s doit être >= 1 ('{token}')")
            return cls('pf', transfer, n_particles)
        if count:
            raise ConfigValidationError(f"'{kind}' n'accepte pas de nombre de points")
        return cls(kind, transfer, None)


def parse_filter_roster(text):
    """Convertit 'pf:3000,tl-pf:3000,ukf' en tuple de FilterSpec"""
    specs = tuple(FilterSpec.parse(token) for token in text.split(",") if token.strip())
    if not specs:
        raise ConfigValidationError("La liste de filtres est vide")
    return specs


@dataclass(frozen=True)
class ScenarioConfig:
    """Paramètres complets d'une expérience"""
    scenario: str
    K: int
    T_s: float
    q: float
    q2: float
    sigma_r: float
    sigma_zeta: float
    I_source: float
    I_w: tuple
    x0: tuple
    P0: tuple
    mc: int
    master_seed: int
    filters: tuple = field(default_factory=lambda: parse_filter_roster(DEFAULT_FILTERS))
    packet_noise_mode: str = DEFAULT_PACKET_NOISE_MODE
    truth_mode: str = DEFAULT_TRUTH_MODE
    truth_seed: int = DEFAULT_TRUTH_SEED

    @property
    def state_dim(self):
        return 4 if self.scenario == 'S1' else 5

    def validate(self):
        """Vérifie les invariants de la configuration"""
        if self.scenario not in SCENARIO_DEFAULTS:
            raise ConfigValidationError(f"Scénario inconnu: '{self.scenario}' (S1 ou S2)")
        if self.K < 1:
            raise ConfigValidationError(f"K doit être >= 1 (reçu {self.K})")
        if self.mc < 1:
            raise ConfigValidationError(f"mc doit être >= 1 (reçu {self.mc})")
        if self.T_s <= 0:
            raise ConfigValidationError(f"T_s doit être > 0 (reçu {self.T_s})")
        if self.q < 0 or self.q2 < 0:
            raise ConfigValidationError("Les paramètres de bruit de processus doivent être >= 0")
        if self.sigma_r <= 0 or self.sigma_zeta <= 0:
            raise ConfigValidationError("sigma_r et sigma_zeta doivent être > 0")
        if self.I_source <= 0:
            raise ConfigValidationError(f"I_source doit être > 0 (reçu {self.I_source})")
        if not self.I_w:
            raise ConfigValidationError("Aucune intensité I_w fournie")
        for intensity in self.I_w:
            if intensity <= 0:
                raise ConfigValidationError(f"Intensité I_w hors domaine: {intensity} (doit être > 0)")
        if len(self.x0) != self.state_dim or len(self.P0) != self.state_dim:
            raise ConfigValidationError(
                f"x0 et P0 doivent avoir {self.state_dim} composantes pour {self.scenario}"
            )
        if any(value < 0 for value in self.P0):
            raise ConfigValidationError("P0 doit être une diagonale positive")
        if self.packet_noise_mode not in PACKET_NOISE_MODES:
            raise ConfigValidationError(
                f"packet_noise_mode inconnu: '{self.packet_noise_mode}' ({' | '.join(PACKET_NOISE_MODES)})"
            )
        if self.truth_mode not in TRUTH_MODES:
            raise ConfigValidationError(
                f"truth_mode inconnu: '{self.truth_mode}' ({' | '.join(TRUTH_MODES)})"
            )
        if self.truth_seed < 0:
            raise ConfigValidationError("truth_seed doit être >= 0")
        if not self.filters:
            raise ConfigValidationError("La liste de filtres est vide")
        return self

    def to_dict(self):
        data = asdict(self)
        data['filters'] = [spec.filter_id for spec in self.filters]
        data['I_w'] = list(self.I_w)
        data['x0'] = list(self.x0)
        data['P0'] = list(self.P0)
        return data


def default_config(scenario, master_seed, **overrides):
    """Configuration pré-remplie avec les valeurs nominales du scénario"""
    if scenario not in SCENARIO_DEFAULTS:
        raise ConfigValidationError(f"Scénario inconnu: '{scenario}' (S1 ou S2)")
    values = dict(SCENARIO_DEFAULTS[scenario])
    values.update(mc=DEFAULT_MC, filters=parse_filter_roster(DEFAULT_FILTERS))
    values.update(overrides)
    return ScenarioConfig(scenario=scenario, master_seed=master_seed, **values).validate()
