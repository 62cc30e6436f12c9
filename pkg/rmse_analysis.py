"""
Analyse des erreurs de position: RMSE par pas, RMSE global, gain du transfert
(ΔRMSE) selon l'écart d'intensité ΔI_w, sensibilité au nombre de particules.
"""
import numpy as np
import pandas as pd

from errors import LengthMismatchError


def rmse_per_step(true_pos, est_pos):
    """RMSE(k) = √((1/MC) Σ_m ‖p_vrai − p_estimé‖²), norme euclidienne de position"""
    true_pos = np.asarray(true_pos, dtype=float)
    est_pos = np.asarray(est_pos, dtype=float)
    if est_pos.ndim == 2:
        est_pos = est_pos[None]
    if true_pos.ndim == 2:
        true_pos = true_pos[None]
    if true_pos.shape[1:] != est_pos.shape[1:] or true_pos.shape[0] not in (1, est_pos.shape[0]):
        raise LengthMismatchError(
            f"positions vraies {true_pos.shape} et estimées {est_pos.shape} non alignées"
        )
    squared = np.sum((true_pos - est_pos) ** 2, axis=-1)
    return np.sqrt(np.mean(squared, axis=0))


def overall_rmse(rmse_series):
    """Moyenne arithmétique du RMSE sur k = 1..K"""
    return float(np.mean(rmse_series))


def delta_rmse(isolated, tl):
    """ΔRMSE = RMSE isolé − RMSE avec transfert"""
    return isolated - tl


def delta_intensity(I_w, I_source):
    """ΔI_w = |I_w − I*_w|"""
    return abs(I_w - I_source)


def rmse_curve_table(result):
    frames = []
    for metrics in result.metrics:
        frames.append(pd.DataFrame({
            'k': np.arange(1, metrics.rmse_per_step.size + 1),
            'filter_id': metrics.filter_id,
            'I_w': metrics.I_w,
            'rmse_m': metrics.rmse_per_step,
        }))
    return pd.concat(frames, ignore_index=True)


def overall_table(result, timing=True):
    rows = []
    for metrics in result.metrics:
        rows.append({
            'filter_id': metrics.filter_id,
            'I_w': metrics.I_w,
            'N_s': metrics.n_particles if metrics.n_particles is not None else metrics.points,
            'overall_rmse_m': metrics.overall_rmse,
            'time_per_step_ms': metrics.wall_time_per_step if timing else float('nan'),
            'isolated_or_tl': 'tl' if metrics.transfer else 'isolated',
        })
    return pd.DataFrame(rows)


def timing_table(result, timing=True):
    rows = []
    for metrics in result.metrics:
        rows.append({
            'filter_id': metrics.filter_id,
            'I_w': metrics.I_w,
            'N_s': metrics.n_particles if metrics.n_particles is not None else metrics.points,
            'mean_ms': metrics.wall_time_per_step if timing else float('nan'),
            'median_ms': metrics.median_time_per_step if timing else float('nan'),
        })
    return pd.DataFrame(rows)


def analyze_transfer_gain(result):
    """ΔRMSE de chaque filtre avec transfert par rapport à son homologue isolé"""
    isolated = {(m.filter_id, m.I_w): m for m in result.metrics if not m.transfer}
    gains = []
    for metrics in result.metrics:
        if not metrics.transfer:
            continue
        base_id = metrics.filter_id[len('tl-'):]
        counterpart = isolated.get((base_id, metrics.I_w))
        if counterpart is None:
            continue
        gains.append({
            'delta_Iw': delta_intensity(metrics.I_w, result.config.I_source),
            'filter_id': base_id,
            'I_w': metrics.I_w,
            'isolated_rmse_m': counterpart.overall_rmse,
            'tl_rmse_m': metrics.overall_rmse,
            'delta_rmse_m': delta_rmse(counterpart.overall_rmse, metrics.overall_rmse),
        })
    return gains


def delta_table(result):
    gains = analyze_transfer_gain(result)
    columns = ['delta_Iw', 'filter_id', 'delta_rmse_m']
    if not gains:
        return pd.DataFrame(columns=columns)
    return pd.DataFrame(gains)[columns].sort_values(['filter_id', 'delta_Iw'], kind='stable').reset_index(drop=True)


def analyze_particle_sensitivity(result):
    """Amélioration du RMSE entre le plus petit et le plus grand N_s, par variante"""
    sensitivity = {}
    for transfer in (False, True):
        for I_w in result.config.I_w:
            runs = sorted(
                (m for m in result.metrics if m.n_particles is not None and m.transfer == transfer and m.I_w == I_w),
                key=lambda m: m.n_particles,
            )
            if len(runs) < 2:
                continue
            label = 'tl-pf' if transfer else 'pf'
            sensitivity[(label, I_w)] = {
                'n_min': runs[0].n_particles,
                'n_max': runs[-1].n_particles,
                'rmse_n_min': runs[0].overall_rmse,
                'rmse_n_max': runs[-1].overall_rmse,
                'improvement_m': runs[0].overall_rmse - runs[-1].overall_rmse,
                'time_ratio': runs[-1].wall_time_per_step / runs[0].wall_time_per_step,
            }
    return sensitivity


def generate_rmse_report(result, verbose=True):
    """Génère le rapport complet sur la précision des filtres primaires"""

    gains = analyze_transfer_gain(result)
    sensitivity = analyze_particle_sensitivity(result)
    best = min(result.metrics, key=lambda m: m.overall_rmse)

    report = {
        'filters': [
            {
                'filter_id': m.filter_id,
                'I_w': m.I_w,
                'points': m.points,
                'overall_rmse_m': m.overall_rmse,
                'time_per_step_ms': m.wall_time_per_step,
                'median_time_per_step_ms': m.median_time_per_step,
                'source_overall_rmse_m': m.source_overall_rmse,
                'degenerate_weight_events': m.degenerate_weight_events,
                'jitter_events': m.jitter_events,
                'mean_ess': m.mean_ess,
            }
            for m in result.metrics
        ],
        'transfer_gain': gains,
        'particle_sensitivity': sensitivity,
        'summary': {
            'scenario': result.config.scenario,
            'mc_runs': result.config.mc,
            'master_seed': result.config.master_seed,
            'best_filter': best.filter_id,
            'best_filter_I_w': best.I_w,
            'best_overall_rmse_m': best.overall_rmse,
            'max_delta_rmse_m': max((g['delta_rmse_m'] for g in gains), default=float('nan')),
            'degenerate_weight_events': sum(m.degenerate_weight_events for m in result.metrics),
        },
    }

    if verbose:
        print("\n=== RÉSUMÉ DE LA PRÉCISION DES FILTRES PRIMAIRES ===")
        print(f"\n1. RMSE global ({result.config.scenario}, {result.config.mc} runs MC):")
        for entry in report['filters']:
            print(f"   - {entry['filter_id']:<14} I_w={entry['I_w']:<4g} "
                  f"RMSE={entry['overall_rmse_m']:.4f} m  "
                  f"temps/pas={entry['time_per_step_ms']:.3f} ms  points={entry['points']}")

        if gains:
            print("\n2. Gain du transfert (ΔRMSE):")
            for gain in gains:
                print(f"   - {gain['filter_id']:<10} ΔI_w={gain['delta_Iw']:<4g} "
                      f"ΔRMSE={gain['delta_rmse_m']:.3f} m")

        if sensitivity:
            print("\n3. Sensibilité au nombre de particules:")
            for (label, I_w), data in sensitivity.items():
                print(f"   - {label} (I_w={I_w:g}): N_s {data['n_min']}→{data['n_max']}, "
                      f"gain {data['improvement_m']:.3f} m, ratio de temps {data['time_ratio']:.2f}")

        events = report['summary']['degenerate_weight_events']
        if events:
            print(f"\n⚠️  {events} remise(s) à l'uniforme de poids dégénérés")

    return report
