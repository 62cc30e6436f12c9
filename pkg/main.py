"""
Script principal du simulateur de poursuite à double capteur avec transfert bayésien
"""
import argparse
import sys
import warnings

import numpy as np

from btl_pf import ReplayChannel, dump_packets, load_packets, run_dual
from config import FilterSpec, __version__
from errors import ConfigValidationError, NumericalError, TrackingError
from report_generator import write_output_bundle
from rmse_analysis import generate_rmse_report, overall_rmse, rmse_per_step
from scenario_loader import parse_config
from selftest import run_selftest
from simulation import POSITION_INDICES, run_experiment, run_measurements, run_truth, tl_pf_streams

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2


def print_header():
    """Affiche l'en-tête du programme"""
    print("=" * 70)
    print("POURSUITE À DOUBLE CAPTEUR - FILTRAGE AVEC TRANSFERT BAYÉSIEN")
    print(f"Filtres particulaires SIR / TL-PF, UKF et CKF3 - v{__version__}")
    print("=" * 70)
    print()


def build_parser():
    parser = argparse.ArgumentParser(prog="main.py", description=__doc__.strip())
    subparsers = parser.add_subparsers(dest="command", required=True)

    run = subparsers.add_parser("run", help="expérience Monte-Carlo complète, écrit les CSV")
    run.add_argument("--config", required=True, help="fichier de scénario (clé = valeur)")
    run.add_argument("--mc", type=int, help="nombre de runs Monte-Carlo")
    run.add_argument("--seed", type=int, help="graine maîtresse")
    run.add_argument("--out-dir", help="dossier de sortie (défaut: resultats/)")
    run.add_argument("--filters", help="ex. pf:3000,tl-pf:3000,ukf,tl-ukf,ckf3,tl-ckf3")
    run.add_argument("--iw-sweep", help="intensités I_w: '4', '1,2,4' ou '1..8'")
    run.add_argument("--workers", type=int, default=1, help="processus parallèles")
    run.add_argument("--no-timing", action="store_true", help="écrit nan dans les colonnes de temps")

    dump = subparsers.add_parser("dump-packets", help="enregistre les paquets de transfert d'un run")
    dump.add_argument("--config", required=True)
    dump.add_argument("--dump-packets", required=True, dest="packet_file", help="fichier de paquets")
    dump.add_argument("--seed", type=int)
    dump.add_argument("--run", type=int, default=0, help="indice du run MC")
    dump.add_argument("--filters", help="tl-pf:N (nombre de particules)")

    replay = subparsers.add_parser("replay-packets", help="rejoue des paquets enregistrés")
    replay.add_argument("--config", required=True)
    replay.add_argument("--replay-packets", required=True, dest="packet_file", help="fichier de paquets")
    replay.add_argument("--seed", type=int)
    replay.add_argument("--run", type=int)

    subparsers.add_parser("selftest", help="vérifications numériques rapides")
    return parser


def print_progress(done, total):
    step = max(1, total // 10)
    if done % step == 0 or done == total:
        print(f"  {done}/{total} runs")


def command_run(args, argv):
    # Étape 1: Configuration
    print("ÉTAPE 1: CHARGEMENT DE LA CONFIGURATION")
    print("-" * 40)
    overrides = {'mc': args.mc, 'seed': args.seed, 'filters': args.filters, 'I_w': args.iw_sweep}
    config = parse_config(args.config, overrides, verbose=True)
    if args.workers < 1:
        raise ConfigValidationError(f"--workers doit être >= 1 (reçu {args.workers})")

    print("\n" + "=" * 70 + "\n")

    # Étape 2: Simulation
    print("ÉTAPE 2: SIMULATION MONTE-CARLO")
    print("-" * 40)
    result = run_experiment(config, workers=args.workers, progress=print_progress)

    print("\n" + "=" * 70 + "\n")

    # Étape 3: Analyse et écriture des résultats
    print("ÉTAPE 3: ANALYSE ET ÉCRITURE DES RÉSULTATS")
    print("-" * 40)
    report = generate_rmse_report(result)
    print()
    bundle = write_output_bundle(result, args.out_dir, timing=not args.no_timing, argv=argv, report=report)

    print("\n" + "=" * 70)
    print("SIMULATION TERMINÉE AVEC SUCCÈS!")
    print(f"Résultats: {bundle.out_dir}")
    return EXIT_OK


def _transfer_particles(config, filters):
    """N_s du TL-PF: --filters, sinon le premier pf/tl-pf de la configuration"""
    if filters:
        spec = FilterSpec.parse(filters)
        if spec.kind != 'pf':
            raise ConfigValidationError(f"dump-packets attend tl-pf:N, reçu '{filters}'")
        return spec.n_particles
    for spec in config.filters:
        if spec.kind == 'pf':
            return spec.n_particles
    raise ConfigValidationError("Aucun filtre particulaire dans la configuration")


def primary_run_rmse(truth, estimates):
    """RMSE global du filtre primaire sur un seul run"""
    estimated = np.array([estimate.mean[POSITION_INDICES] for estimate in estimates])
    return overall_rmse(rmse_per_step(truth[1:, POSITION_INDICES], estimated))


def _paired_run(config, run_index, n_particles, I_w, channel=None):
    if run_index < 0:
        raise ConfigValidationError(f"--run doit être >= 0 (reçu {run_index})")
    truth = run_truth(config, run_index)
    measurements = run_measurements(config, truth, run_index, I_w)
    rngs = tl_pf_streams(config, run_index, n_particles)
    with warnings.catch_warnings():
        warnings.simplefilter('ignore')
        result = run_dual(config, truth, measurements, rngs, n_particles, I_w=I_w, channel=channel)
    return truth, result


def command_dump(args):
    config = parse_config(args.config, {'seed': args.seed}, verbose=True)
    n_particles = _transfer_particles(config, args.filters)
    I_w = config.I_w[0]

    truth, result = _paired_run(config, args.run, n_particles, I_w)
    header = {
        'scenario': config.scenario,
        'seed': config.master_seed,
        'run': args.run,
        'N_s': n_particles,
        'I_w': repr(I_w),
        'version': __version__,
    }
    # le dernier paquet (pas K+1) n'est jamais consommé
    dump_packets(args.packet_file, result.packets[:-1], header)

    print(f"✓ {len(result.packets) - 1} paquets écrits dans {args.packet_file}")
    print(f"RMSE primaire (TL-PF, N_s={n_particles}, I_w={I_w:g}): "
          f"{primary_run_rmse(truth, result.primary_estimates):.12f} m")
    return EXIT_OK


def command_replay(args):
    header, packets = load_packets(args.packet_file)
    try:
        seed = args.seed if args.seed is not None else int(header['seed'])
        run_index = args.run if args.run is not None else int(header.get('run', 0))
        n_particles = int(header['N_s'])
        I_w = float(header['I_w'])
    except (KeyError, ValueError) as e:
        raise ConfigValidationError(f"En-tête de paquets incomplet ou invalide: {e}") from None

    config = parse_config(args.config, {'seed': seed, 'I_w': (I_w,)}, verbose=True)
    if header.get('scenario', config.scenario) != config.scenario:
        raise ConfigValidationError(
            f"Paquets du scénario {header['scenario']}, configuration {config.scenario}"
        )

    truth, result = _paired_run(config, run_index, n_particles, I_w, channel=ReplayChannel(packets))
    print(f"✓ {len(packets)} paquets rejoués depuis {args.packet_file}")
    print(f"RMSE primaire (TL-PF rejoué, N_s={n_particles}, I_w={I_w:g}): "
          f"{primary_run_rmse(truth, result.primary_estimates):.12f} m")
    return EXIT_OK


def main(argv=None):
    """Fonction principale; retourne le code de sortie"""
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(argv)
    print_header()

    try:
        if args.command == "run":
            return command_run(args, argv)
        if args.command == "dump-packets":
            return command_dump(args)
        if args.command == "replay-packets":
            return command_replay(args)
        return EXIT_OK if run_selftest() else EXIT_NUMERICAL
    except NumericalError as e:
        print(f"\n✗ Échec numérique: {e}")
        return EXIT_NUMERICAL
    except (TrackingError, ValueError, OSError) as e:
        print(f"\n✗ Erreur de validation: {e}")
        return EXIT_VALIDATION


if __name__ == "__main__":
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        print("\n\n✗ Simulation interrompue par l'utilisateur")
        sys.exit(0)
