"""Visualizations and distributions of estimated residuals."""
import csv
from dataclasses import dataclass
from typing import List, Optional, TextIO

import numpy as np

from wrfcm.image import MAX_INTENSITY, ImageTensor

HISTOGRAM_HEADER = ('bin_left', 'bin_right', 'residual_count', 'weighted_count')


@dataclass(frozen=True)
class HistogramBin:

    left: float
    right: float
    residual_count: int
    weighted_count: int


def residual_image(r: np.ndarray, width: int, height: int) -> 'ImageTensor':
    """Maps |r| (Euclidean norm over channels) to [0, 255] with per-image min-max scaling.

    A constant magnitude maps to 0.
    """
    magnitude = np.sqrt(np.sum(np.square(r), axis=1))
    low, high = magnitude.min(), magnitude.max()

    if high > low:
        scaled = (magnitude - low) * (MAX_INTENSITY / (high - low))
    else:
        scaled = np.zeros_like(magnitude)

    return ImageTensor(width, height, scaled)


def residual_histogram(r: np.ndarray, w: Optional[np.ndarray] = None, bins: int = 64) -> List['HistogramBin']:
    """Counts residuals and weighted residuals w * r over a shared symmetric range.

    Without weights, the weighted counts equal the residual counts.

    :param r: residual (K, L)
    :param w: weights (K, L)
    :param bins: number of bins
    :returns: one entry per bin
    """
    if bins < 1:
        raise ValueError(f'A histogram needs at least one bin, got {bins}')

    r = np.asarray(r, dtype=np.float64).ravel()
    weighted = r if w is None else (np.asarray(w) * np.asarray(r).reshape(np.shape(w))).ravel()

    bound = float(np.max(np.abs(r))) if r.size else 0.0
    bound = bound if bound > 0 else 1.0
    edges = np.linspace(-bound, bound, bins + 1)

    residual_counts, _ = np.histogram(r, bins=edges)
    weighted_counts, _ = np.histogram(weighted, bins=edges)

    return [HistogramBin(float(edges[k]), float(edges[k + 1]), int(residual_counts[k]), int(weighted_counts[k]))
            for k in range(bins)]


def write_histogram_csv(histogram: List['HistogramBin'], stream: TextIO) -> None:
    writer = csv.writer(stream, lineterminator='\n')
    writer.writerow(HISTOGRAM_HEADER)
    for b in histogram:
        writer.writerow((repr(b.left), repr(b.right), b.residual_count, b.weighted_count))
