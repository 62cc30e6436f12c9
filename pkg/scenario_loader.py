"""
Module de chargement et validation des fichiers de scénario
"""
import configparser
import math
from pathlib import Path

from config import (
    DEFAULT_FILTERS,
    DEFAULT_MC,
    DEFAULT_PACKET_NOISE_MODE,
    DEFAULT_TRUTH_MODE,
    DEFAULT_TRUTH_SEED,
    SCENARIO_DEFAULTS,
    ScenarioConfig,
    parse_filter_roster,
)
from errors import ConfigValidationError

SECTION = 'scenario'

KNOWN_KEYS = {
    'scenario', 'K', 'T_s', 'q', 'q1', 'q2', 'sigma_r', 'sigma_zeta',
    'I_source', 'I_w', 'x0', 'P0', 'mc', 'seed', 'filters', 'packet_noise_mode',
    'truth_mode', 'truth_seed',
}


def load_config_file(path):
    """Lit un fichier clé = valeur; l'en-tête [scenario] est facultatif"""
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as e:
        raise ConfigValidationError(f"Impossible de lire {path}: {e}") from None

    parser = configparser.ConfigParser(inline_comment_prefixes=('#', ';'), interpolation=None)
    parser.optionxform = str
    if not text.lstrip().startswith('['):
        text = f"[{SECTION}]\n{text}"
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as e:
        raise ConfigValidationError(f"Fichier de scénario mal formé: {e}") from None

    extra_sections = [name for name in parser.sections() if name != SECTION]
    if extra_sections:
        raise ConfigValidationError(f"Section(s) inconnue(s): {', '.join(extra_sections)}")
    return dict(parser[SECTION]) if parser.has_section(SECTION) else {}


def parse_float(key, value):
    try:
        number = float(value)
    except (TypeError, ValueError):
        raise ConfigValidationError(f"{key}: nombre attendu, reçu '{value}'") from None
    if not math.isfinite(number):
        raise ConfigValidationError(f"{key}: valeur non finie '{value}'")
    return number


def parse_int(key, value):
    try:
        return int(str(value).strip())
    except ValueError:
        raise ConfigValidationError(f"{key}: entier attendu, reçu '{value}'") from None


def parse_vector(key, value):
    if isinstance(value, (tuple, list)):
        return tuple(parse_float(key, item) for item in value)
    return tuple(parse_float(key, item) for item in str(value).split(',') if item.strip())


def parse_intensities(value):
    """'4', '1,2,4' ou '1..8' (pas entier, bornes incluses)"""
    if isinstance(value, (int, float)):
        return (float(value),)
    if isinstance(value, (tuple, list)):
        return tuple(float(item) for item in value)
    text = str(value).strip()
    if '..' in text:
        start, _, stop = text.partition('..')
        start, stop = parse_int('I_w', start), parse_int('I_w', stop)
        if stop < start:
            raise ConfigValidationError(f"I_w: intervalle vide '{text}'")
        return tuple(float(i) for i in range(start, stop + 1))
    return parse_vector('I_w', text)


def clean_config_values(raw):
    """Convertit les chaînes lues en valeurs typées et complète avec les valeurs nominales"""
    unknown = sorted(set(raw) - KNOWN_KEYS)
    if unknown:
        raise ConfigValidationError(f"Clé(s) inconnue(s): {', '.join(unknown)}")

    scenario = str(raw.get('scenario', 'S2')).strip().upper()
    if scenario not in SCENARIO_DEFAULTS:
        raise ConfigValidationError(f"Scénario inconnu: '{scenario}' (S1 ou S2)")
    if 'seed' not in raw or raw['seed'] in (None, ''):
        raise ConfigValidationError("Graine manquante: renseigner 'seed' ou --seed")
    if 'q' in raw and 'q1' in raw:
        raise ConfigValidationError("q et q1 désignent le même paramètre: n'en fournir qu'un")

    defaults = SCENARIO_DEFAULTS[scenario]
    values = {
        'scenario': scenario,
        'K': parse_int('K', raw.get('K', defaults['K'])),
        'T_s': parse_float('T_s', raw.get('T_s', defaults['T_s'])),
        'q': parse_float('q', raw.get('q', raw.get('q1', defaults['q']))),
        'q2': parse_float('q2', raw.get('q2', defaults['q2'])),
        'sigma_r': parse_float('sigma_r', raw.get('sigma_r', defaults['sigma_r'])),
        'sigma_zeta': parse_float('sigma_zeta', raw.get('sigma_zeta', defaults['sigma_zeta'])),
        'I_source': parse_float('I_source', raw.get('I_source', defaults['I_source'])),
        'I_w': parse_intensities(raw.get('I_w', defaults['I_w'])),
        'x0': parse_vector('x0', raw.get('x0', defaults['x0'])),
        'P0': parse_vector('P0', raw.get('P0', defaults['P0'])),
        'mc': parse_int('mc', raw.get('mc', DEFAULT_MC)),
        'master_seed': parse_int('seed', raw['seed']),
        'packet_noise_mode': str(raw.get('packet_noise_mode', DEFAULT_PACKET_NOISE_MODE)).strip().lower(),
        'truth_mode': str(raw.get('truth_mode', DEFAULT_TRUTH_MODE)).strip().lower(),
        'truth_seed': parse_int('truth_seed', raw.get('truth_seed', DEFAULT_TRUTH_SEED)),
    }
    filters = raw.get('filters', DEFAULT_FILTERS)
    values['filters'] = tuple(filters) if isinstance(filters, (tuple, list)) else parse_filter_roster(filters)
    if values['master_seed'] < 0:
        raise ConfigValidationError("La graine doit être >= 0")
    return values


def parse_config(path=None, overrides=None, verbose=False):
    """Charge, complète et valide une configuration de scénario"""
    raw = load_config_file(path) if path is not None else {}
    for key, value in (overrides or {}).items():
        if value is not None:
            raw[key] = value

    config = ScenarioConfig(**clean_config_values(raw)).validate()

    if verbose:
        print(f"✓ Configuration chargée: scénario {config.scenario}, K={config.K}, {config.mc} runs MC")
        print(f"- Intensités: I*_w={config.I_source:g}, I_w={', '.join(f'{i:g}' for i in config.I_w)}")
        print(f"- Filtres: {', '.join(spec.filter_id for spec in config.filters)}")
        print(f"- Graine maîtresse: {config.master_seed}")
        if config.truth_mode == 'reference':
            print(f"- Vérité: trajectoire de référence (truth_seed={config.truth_seed})")
        else:
            print("- Vérité: tirée à chaque run depuis N(x₀, P₀)")
    return config
