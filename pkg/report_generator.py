"""
Écriture des résultats d'une expérience: CSV des courbes et tableaux,
manifeste de reproduction et résumé texte
"""
import json
import platform
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import pandas as pd
import scipy

from config import CSV_FLOAT_FORMAT, CSV_HEADERS, RESULTS_DIR, __version__
from rmse_analysis import delta_table, overall_table, rmse_curve_table, timing_table


@dataclass(frozen=True)
class OutputBundle:
    """Chemins des fichiers produits par une invocation de `run`"""
    out_dir: Path

    @property
    def rmse_curve(self):
        return self.out_dir / "rmse_curve.csv"

    @property
    def overall(self):
        return self.out_dir / "overall.csv"

    @property
    def delta(self):
        return self.out_dir / "delta.csv"

    @property
    def trajectory(self):
        return self.out_dir / "trajectory.csv"

    @property
    def timing(self):
        return self.out_dir / "timing.csv"

    @property
    def manifest(self):
        return self.out_dir / "run_manifest.json"

    @property
    def summary(self):
        return self.out_dir / "resume.txt"

    def csv_files(self):
        return [self.rmse_curve, self.overall, self.delta, self.trajectory, self.timing]


def write_csv(frame, path, columns):
    """CSV à séparateur point, 6 chiffres significatifs, fins de ligne LF"""
    frame = frame.reindex(columns=list(columns))
    frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, na_rep='nan', lineterminator='\n')


def trajectory_table(result):
    truth = result.trajectory
    return pd.DataFrame({'k': np.arange(truth.shape[0]), 'x_m': truth[:, 0], 'y_m': truth[:, 2]})


def build_manifest(result, argv=None, timing=True):
    """Tout ce qu'il faut pour reproduire les CSV: configuration, graine, versions"""
    return {
        'version': __version__,
        'config': result.config.to_dict(),
        'master_seed': result.config.master_seed,
        'argv': list(argv or []),
        'timing': timing,
        'python': platform.python_version(),
        'numpy': np.__version__,
        'scipy': scipy.__version__,
        'pandas': pd.__version__,
        'created_utc': datetime.now(timezone.utc).isoformat(timespec='seconds'),
    }


def write_output_bundle(result, out_dir=None, timing=True, argv=None, report=None):
    """Écrit tous les fichiers de sortie et retourne l'OutputBundle"""
    bundle = OutputBundle(Path(out_dir) if out_dir is not None else RESULTS_DIR)
    bundle.out_dir.mkdir(parents=True, exist_ok=True)

    write_csv(rmse_curve_table(result), bundle.rmse_curve, CSV_HEADERS['rmse_curve'])
    write_csv(overall_table(result, timing), bundle.overall, CSV_HEADERS['overall'])
    write_csv(delta_table(result), bundle.delta, CSV_HEADERS['delta'])
    write_csv(trajectory_table(result), bundle.trajectory, CSV_HEADERS['trajectory'])
    write_csv(timing_table(result, timing), bundle.timing, CSV_HEADERS['timing'])

    with open(bundle.manifest, 'w', encoding='utf-8') as f:
        json.dump(build_manifest(result, argv, timing), f, indent=2, sort_keys=True)
        f.write('\n')

    if report is not None:
        create_summary_table(report, bundle.summary)

    for path in bundle.csv_files() + [bundle.manifest]:
        print(f"✓ {path.name} écrit")
    return bundle


def create_summary_table(report, summary_file):
    """Crée un tableau récapitulatif en format texte"""
    summary = report.get('summary', {})

    try:
        with open(summary_file, 'w', encoding='utf-8') as f:
            f.write("RÉSUMÉ - POURSUITE À DOUBLE CAPTEUR AVEC TRANSFERT BAYÉSIEN\n")
            f.write("=" * 60 + "\n\n")

            f.write("INDICATEURS CLÉS\n")
            f.write("-" * 30 + "\n")
            f.write(f"Scénario: {summary.get('scenario', 'N/A')}\n")
            f.write(f"Runs Monte-Carlo: {summary.get('mc_runs', 'N/A')}\n")
            f.write(f"Graine maîtresse: {summary.get('master_seed', 'N/A')}\n")
            f.write(f"Meilleur filtre: {summary.get('best_filter', 'N/A')} "
                    f"(I_w={summary.get('best_filter_I_w', float('nan')):g}, "
                    f"RMSE={summary.get('best_overall_rmse_m', float('nan')):.4f} m)\n")
            f.write(f"Remises à l'uniforme des poids: {summary.get('degenerate_weight_events', 0)}\n")
            f.write("\n")

            f.write("FILTRES PRIMAIRES\n")
            f.write("-" * 30 + "\n")
            f.write(f"{'filtre':<14}{'I_w':>6}{'points':>8}{'RMSE (m)':>12}{'ms/pas':>10}{'source (m)':>12}\n")
            for entry in report.get('filters', []):
                source = entry.get('source_overall_rmse_m')
                source_text = f"{source:.4f}" if source is not None else "-"
                f.write(f"{entry['filter_id']:<14}{entry['I_w']:>6g}{entry['points']:>8}"
                        f"{entry['overall_rmse_m']:>12.4f}{entry['time_per_step_ms']:>10.3f}{source_text:>12}\n")
            f.write("\n")

            gains = report.get('transfer_gain', [])
            if gains:
                f.write("GAIN DU TRANSFERT (ΔRMSE = isolé − TL)\n")
                f.write("-" * 30 + "\n")
                for gain in gains:
                    f.write(f"- {gain['filter_id']} ΔI_w={gain['delta_Iw']:g}: "
                            f"{gain['delta_rmse_m']:.3f} m\n")

        print(f"✓ Résumé créé : {summary_file}")

    except OSError as e:
        print(f"✗ Erreur lors de la création du résumé : {e}")
