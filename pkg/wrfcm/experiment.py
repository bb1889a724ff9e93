"""Runs segmentations, writes their artifacts and sweeps benchmark parameters."""
import csv
import dataclasses
import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, TextIO, Tuple

import numpy as np

from wrfcm.config import SolverConfig
from wrfcm.fcm import defuzzify, fcm_fit
from wrfcm.image import ImageTensor
from wrfcm.imageio import save_image, save_label_map
from wrfcm.metrics import MetricsReport, report
from wrfcm.noise import NoiseSpec, corrupt
from wrfcm.residual import residual_histogram, residual_image, write_histogram_csv
from wrfcm.solver import SolveOutput, update_weights, wrfcm_fit

ARTIFACTS = {
    'labels': 'labels.png',
    'segmented': 'segmented.png',
    'residual': 'residual.png',
    'trace': 'trace.csv',
    'histogram': 'residual_histogram.csv',
    'metrics': 'metrics.json'
}
"""File names written by a segmentation run."""

BENCHMARK_HEADER = ('seed', 'algorithm', 'phi', 'sa', 'sds_macro', 'mcc_macro', 'iterations', 'converged')

logger = logging.getLogger(__name__)


def fcm_solve(image: 'ImageTensor', config: 'SolverConfig') -> 'SolveOutput':
    """Runs the FCM baseline and packs it like a WRFCM result (zero residual, unit weights)."""
    u, v, trace = fcm_fit(image, config)
    labels, segmented = defuzzify(u, v)

    return SolveOutput(u, v, np.zeros_like(image.data), np.ones_like(image.data),
                       labels, image.replace(segmented), trace)


ALGORITHMS: Dict[str, Callable[['ImageTensor', 'SolverConfig'], 'SolveOutput']] = {
    'fcm': fcm_solve,
    'wrfcm': wrfcm_fit
}
"""Association between an algorithm name and its solver."""


def solve(image: 'ImageTensor', algorithm: str, config: 'SolverConfig') -> Tuple['SolveOutput', float]:
    """Runs an algorithm and measures its wall time.

    :raises ValueError: if the algorithm is unknown
    :returns: the result and the elapsed time in milliseconds
    """
    try:
        solver = ALGORITHMS[algorithm]
    except KeyError:
        raise ValueError(f'Unknown algorithm {algorithm}, expected one of {sorted(ALGORITHMS)}') from None

    start = time.perf_counter()
    output = solver(image, config)
    elapsed = (time.perf_counter() - start) * 1000.0

    return output, elapsed


def write_json(data: dict, path: str) -> None:
    with open(path, 'w') as f:
        json.dump(data, f, indent=2, sort_keys=True)
        f.write('\n')
    logger.info(f'Wrote {path}')


def write_segmentation(output: 'SolveOutput', c: int, out_dir: str, truth: Optional[np.ndarray] = None,
                       wall_time_ms: Optional[float] = None) -> Optional['MetricsReport']:
    """Writes the artifacts of a segmentation into a directory.

    The label map, the segmented image, the residual visualization, the
    convergence trace and the residual histogram are always written; the
    metrics report only when a ground truth is given.

    :param output: result of a solver
    :param c: number of clusters
    :param out_dir: output directory, created if needed
    :param truth: ground-truth labels of shape (K,)
    :param wall_time_ms: solver time recorded in the report, None to omit it
    :returns: the metrics report or None
    """
    os.makedirs(out_dir, exist_ok=True)
    segmented = output.segmented

    save_label_map(output.labels, c, segmented.width, segmented.height, os.path.join(out_dir, ARTIFACTS['labels']))
    save_image(segmented, os.path.join(out_dir, ARTIFACTS['segmented']))
    save_image(residual_image(output.r, segmented.width, segmented.height), os.path.join(out_dir, ARTIFACTS['residual']))

    with open(os.path.join(out_dir, ARTIFACTS['trace']), 'w', newline='') as f:
        output.trace.write_csv(f)

    with open(os.path.join(out_dir, ARTIFACTS['histogram']), 'w', newline='') as f:
        write_histogram_csv(residual_histogram(output.r, output.w), f)

    if truth is None:
        return None

    metrics = report(output.labels, truth, c)
    metrics.iterations = output.trace.iterations
    metrics.wall_time_ms = wall_time_ms
    write_json(metrics.to_dict(), os.path.join(out_dir, ARTIFACTS['metrics']))

    return metrics


def write_noise_histogram(clean: 'ImageTensor', observed: 'ImageTensor', xi: float, stream: TextIO) -> None:
    """Writes the histogram of the true noise X - X_clean and of its weighted version."""
    noise = observed.data - clean.data
    write_histogram_csv(residual_histogram(noise, update_weights(noise, xi)), stream)


def parse_sweep(text: str) -> List[float]:
    """Parses ``start:stop:step`` (stop included), a comma list or a single value.

    :raises ValueError: if the text is malformed or the step is not positive
    """
    if ':' not in text:
        return [float(item) for item in text.split(',') if item.strip()]

    parts = text.split(':')
    if len(parts) != 3:
        raise ValueError(f'Expected start:stop:step, got {text}')

    start, stop, step = (float(p) for p in parts)
    if step <= 0:
        raise ValueError(f'Sweep step must be positive, got {step}')

    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + k * step, 10) for k in range(max(count, 0))]


@dataclass(frozen=True)
class BenchmarkRow:

    seed: int
    algorithm: str
    phi: Optional[float]
    sa: float
    sds_macro: float
    mcc_macro: float
    iterations: int
    converged: bool


def _benchmark_run(observed: 'ImageTensor', truth: np.ndarray, algorithm: str, config: 'SolverConfig',
                   phi: Optional[float]) -> 'BenchmarkRow':
    output, _ = solve(observed, algorithm, config)
    metrics = report(output.labels, truth, config.c)
    logger.info(f'seed={config.seed} {algorithm} phi={phi}: SA={metrics.sa:.5f}')

    return BenchmarkRow(config.seed, algorithm, phi, metrics.sa, metrics.sds_macro, metrics.mcc_macro,
                        output.trace.iterations, output.trace.converged)


def benchmark(clean: 'ImageTensor', truth: np.ndarray, noise: 'NoiseSpec', config: 'SolverConfig',
              seeds: Sequence[int], phis: Sequence[float], jobs: int = 1,
              include_fcm: bool = True) -> List['BenchmarkRow']:
    """Corrupts a clean image once per seed and segments it for every phi.

    Each seed drives both the noise and the prototype initialization. The FCM
    baseline runs once per seed. Runs are independent and may be spread over
    ``jobs`` threads; rows come back ordered by seed, algorithm and phi.

    :returns: one row per run
    """
    tasks = []
    for seed in seeds:
        observed = corrupt(clean, dataclasses.replace(noise, seed=seed))
        if include_fcm:
            tasks.append((observed, 'fcm', dataclasses.replace(config, seed=seed), None))
        for phi in phis:
            tasks.append((observed, 'wrfcm', dataclasses.replace(config, seed=seed, phi=phi), phi))

    logger.info(f'Benchmark of {len(tasks)} runs on {jobs} worker(s)')

    if jobs <= 1:
        return [_benchmark_run(obs, truth, algo, cfg, phi) for obs, algo, cfg, phi in tasks]

    with ThreadPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(_benchmark_run, obs, truth, algo, cfg, phi) for obs, algo, cfg, phi in tasks]
        return [f.result() for f in futures]


def write_benchmark_csv(rows: Sequence['BenchmarkRow'], stream: TextIO) -> None:
    writer = csv.writer(stream, lineterminator='\n')
    writer.writerow(BENCHMARK_HEADER)
    for row in rows:
        writer.writerow((row.seed, row.algorithm, '' if row.phi is None else repr(row.phi),
                         repr(row.sa), repr(row.sds_macro), repr(row.mcc_macro), row.iterations, int(row.converged)))
