"""Command line entry point: ``wrfcm segment|synth-noise|synth-image|evaluate|benchmark``."""
import argparse
import json
import logging
import os
import sys
from typing import Dict, List, Optional, Sequence

from wrfcm.config import SolverConfig
from wrfcm.experiment import (benchmark, parse_sweep, solve, write_benchmark_csv,
                              write_json, write_noise_histogram, write_segmentation)
from wrfcm.imageio import load_image, load_label_map, save_image, save_label_map
from wrfcm.metrics import report
from wrfcm.noise import ImpulseKind, NoiseSpec, corrupt
from wrfcm.synthetic import DEFAULT_LEVELS, Geometry, SyntheticSpec, gen_synthetic

IMPULSE_KINDS = {
    'random': ImpulseKind.RANDOM_VALUED,
    'salt-pepper': ImpulseKind.SALT_AND_PEPPER
}

GEOMETRIES = {
    'blocks': Geometry.BLOCKS,
    'stripes': Geometry.STRIPES,
    'circles': Geometry.CIRCLES
}

logger = logging.getLogger(__name__)


def _solver_options() -> argparse.ArgumentParser:
    defaults = SolverConfig(c=2)
    parser = argparse.ArgumentParser(add_help=False)
    group = parser.add_argument_group('solver')
    group.add_argument('--c', type=int, default=4, help='Number of clusters')
    group.add_argument('--m', type=float, default=defaults.m, help='Fuzzification exponent')
    group.add_argument('--eps', type=float, default=defaults.eps, help='Convergence threshold on the membership change')
    group.add_argument('--xi', type=float, default=defaults.xi, help='Decay rate of the residual weights')
    group.add_argument('--phi', type=float, default=defaults.phi, help='Fidelity scale, beta = phi * stddev / 100 with stddev in percent of the range')
    group.add_argument('--window', type=int, default=defaults.radius, dest='radius', help='Window radius (1 gives 3x3)')
    group.add_argument('--max-iter', type=int, default=defaults.max_iter, dest='max_iter', help='Iteration cap')
    group.add_argument('--seed', type=int, default=defaults.seed, help='Random seed')
    return parser


def _noise_options() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(add_help=False)
    group = parser.add_argument_group('noise')
    group.add_argument('--poisson', action='store_true', help='Apply Poisson noise first')
    group.add_argument('--sigma', type=float, default=0.0, help='Standard deviation of the Gaussian noise')
    group.add_argument('--impulse-p', type=float, default=0.0, dest='impulse_p', help='Impulse noise probability')
    group.add_argument('--impulse-kind', choices=sorted(IMPULSE_KINDS), default='random', dest='impulse_kind',
                       help='Values written by impulse noise')
    return parser


def _synthetic_options() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(add_help=False)
    group = parser.add_argument_group('synthetic image')
    group.add_argument('--width', type=int, default=256, help='Width of a generated image')
    group.add_argument('--height', type=int, default=256, help='Height of a generated image')
    group.add_argument('--levels', default=None, help='Comma separated gray levels of the regions')
    group.add_argument('--geometry', choices=sorted(GEOMETRIES), default='blocks', help='Layout of the regions')
    return parser


def build_parser() -> argparse.ArgumentParser:
    """Creates the argument parser and its subcommands."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', default=None, metavar='FILE', help='JSON file of option values')
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument('-v', '--verbose', action='store_true', help='Log every iteration')
    verbosity.add_argument('-q', '--quiet', action='store_true', help='Only log warnings and errors')

    parser = argparse.ArgumentParser(prog='wrfcm', description='Residual-driven fuzzy c-means image segmentation.')
    sub = parser.add_subparsers(dest='command', metavar='command')
    sub.required = True

    segment = sub.add_parser('segment', parents=[common, _solver_options()], help='Segment an image')
    segment.add_argument('--input', required=True, help='8-bit PGM/PNG image')
    segment.add_argument('--truth', default=None, help='Ground-truth label map, enables the metrics report')
    segment.add_argument('--algo', choices=['fcm', 'wrfcm'], default='wrfcm', help='Algorithm')
    segment.add_argument('--out-dir', default='.', dest='out_dir', help='Output directory')
    segment.add_argument('--timing', action='store_true', help='Record the solver wall time in the report')

    synth_noise = sub.add_parser('synth-noise', parents=[common, _noise_options()], help='Corrupt a clean image')
    synth_noise.add_argument('--input', required=True, help='Clean 8-bit image')
    synth_noise.add_argument('--seed', type=int, default=0, help='Random seed')
    synth_noise.add_argument('--xi', type=float, default=SolverConfig(c=2).xi, help='Decay rate for the weighted histogram')
    synth_noise.add_argument('--out-dir', default='.', dest='out_dir', help='Output directory')

    synth_image = sub.add_parser('synth-image', parents=[common, _synthetic_options()],
                                 help='Generate a synthetic image and its ground truth')
    synth_image.add_argument('--c', type=int, default=4, help='Number of regions (with default levels)')
    synth_image.add_argument('--out-dir', default='.', dest='out_dir', help='Output directory')

    evaluate = sub.add_parser('evaluate', parents=[common], help='Compare a label map with a ground truth')
    evaluate.add_argument('--pred', required=True, help='Predicted label map')
    evaluate.add_argument('--truth', required=True, help='Ground-truth label map')
    evaluate.add_argument('--c', type=int, default=4, help='Number of clusters')
    evaluate.add_argument('--out', default=None, help='JSON report file, printed when omitted')

    bench = sub.add_parser('benchmark', parents=[common, _solver_options(), _noise_options(), _synthetic_options()],
                           help='Sweep seeds and phi over a noisy image')
    bench.add_argument('--input', default=None, help='Clean image, a synthetic one is generated when omitted')
    bench.add_argument('--truth', default=None, help='Ground truth of --input')
    bench.add_argument('--seeds', default='0', help='Seeds as start:stop:step or a comma list')
    bench.add_argument('--phi-sweep', default='5:10:0.5', dest='phi_sweep', help='phi values as start:stop:step')
    bench.add_argument('--no-fcm', action='store_true', dest='no_fcm', help='Skip the FCM baseline')
    bench.add_argument('--jobs', type=int, default=1, help='Number of worker threads')
    bench.add_argument('--out-dir', default='.', dest='out_dir', help='Output directory')

    return parser


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    """Parses the command line, filling the options missing from it with the config file.

    Precedence: command line flags, then config file values, then defaults.

    :raises SystemExit: if the config file is unreadable or holds unknown keys
    """
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.config is None:
        return args

    try:
        with open(args.config) as f:
            values = json.load(f)
    except (OSError, ValueError) as e:
        parser.error(f'Unable to read config file {args.config}: {e}')

    if not isinstance(values, dict):
        parser.error(f'Config file {args.config} must hold a JSON object')

    known = set(vars(args))
    unknown = sorted(set(values) - known)
    if unknown:
        parser.error(f'Unknown keys in {args.config}: {", ".join(unknown)}')

    subparser = _subparsers(parser)[args.command]
    subparser.set_defaults(**values)

    return parser.parse_args(argv)


def _subparsers(parser: argparse.ArgumentParser) -> Dict[str, argparse.ArgumentParser]:
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices
    return {}


def solver_config(args: argparse.Namespace) -> 'SolverConfig':
    return SolverConfig(c=args.c, m=args.m, eps=args.eps, xi=args.xi, phi=args.phi,
                        radius=args.radius, max_iter=args.max_iter, seed=args.seed)


def noise_spec(args: argparse.Namespace) -> 'NoiseSpec':
    return NoiseSpec(poisson=args.poisson, sigma=args.sigma, impulse_p=args.impulse_p,
                     impulse_kind=IMPULSE_KINDS[args.impulse_kind], seed=args.seed)


def synthetic_spec(args: argparse.Namespace) -> 'SyntheticSpec':
    if args.levels is not None:
        levels = tuple(float(level) for level in args.levels.split(','))
    elif args.c in DEFAULT_LEVELS:
        levels = DEFAULT_LEVELS[args.c]
    else:
        step = 255.0 / max(args.c - 1, 1)
        levels = tuple(round(k * step) for k in range(args.c))

    return SyntheticSpec(args.width, args.height, levels, GEOMETRIES[args.geometry])


def cmd_segment(args: argparse.Namespace) -> None:
    config = solver_config(args)
    image = load_image(args.input)
    truth = load_label_map(args.truth, config.c) if args.truth is not None else None

    output, elapsed = solve(image, args.algo, config)
    metrics = write_segmentation(output, config.c, args.out_dir, truth, elapsed if args.timing else None)

    if metrics is not None:
        logger.info(f'SA={metrics.sa:.5f} SDS={metrics.sds_macro:.5f} MCC={metrics.mcc_macro:.5f}')


def cmd_synth_noise(args: argparse.Namespace) -> None:
    clean = load_image(args.input)
    observed = corrupt(clean, noise_spec(args))

    os.makedirs(args.out_dir, exist_ok=True)
    save_image(observed, os.path.join(args.out_dir, 'noisy.png'))

    with open(os.path.join(args.out_dir, 'noise_histogram.csv'), 'w', newline='') as f:
        write_noise_histogram(clean, observed, args.xi, f)


def cmd_synth_image(args: argparse.Namespace) -> None:
    spec = synthetic_spec(args)
    clean, truth = gen_synthetic(spec)

    os.makedirs(args.out_dir, exist_ok=True)
    save_image(clean, os.path.join(args.out_dir, 'clean.png'))
    save_label_map(truth, spec.c, spec.width, spec.height, os.path.join(args.out_dir, 'truth.png'))


def cmd_evaluate(args: argparse.Namespace) -> None:
    pred = load_label_map(args.pred, args.c)
    truth = load_label_map(args.truth, args.c)
    data = report(pred, truth, args.c).to_dict()

    if args.out is None:
        json.dump(data, sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write('\n')
    else:
        write_json(data, args.out)


def cmd_benchmark(args: argparse.Namespace) -> None:
    config = solver_config(args)

    if args.input is not None:
        if args.truth is None:
            raise ValueError('benchmark --input requires --truth')
        clean = load_image(args.input)
        truth = load_label_map(args.truth, config.c)
    else:
        spec = synthetic_spec(args)
        if spec.c != config.c:
            raise ValueError(f'--levels defines {spec.c} regions but --c is {config.c}')
        clean, truth = gen_synthetic(spec)

    seeds = [int(s) for s in parse_sweep(args.seeds)]
    rows = benchmark(clean, truth, noise_spec(args), config, seeds, parse_sweep(args.phi_sweep),
                     jobs=args.jobs, include_fcm=not args.no_fcm)

    os.makedirs(args.out_dir, exist_ok=True)
    path = os.path.join(args.out_dir, 'benchmark.csv')
    with open(path, 'w', newline='') as f:
        write_benchmark_csv(rows, f)
    logger.info(f'Wrote {path}')


COMMANDS = {
    'segment': cmd_segment,
    'synth-noise': cmd_synth_noise,
    'synth-image': cmd_synth_image,
    'evaluate': cmd_evaluate,
    'benchmark': cmd_benchmark
}
"""Association between a subcommand and its handler."""


def main(argv: Optional[List[str]] = None) -> None:
    """Main function."""
    args = parse_args(argv)

    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format='%(levelname)s: %(name)s: %(message)s')

    try:
        COMMANDS[args.command](args)
    except OSError as e:
        logger.error(f'{e.filename or ""}: {e.strerror or e}')
        raise SystemExit(1)
    except (ValueError, RuntimeError) as e:
        logger.error(str(e))
        raise SystemExit(1)


if __name__ == '__main__':
    main()
