"""Segmentation accuracy, Sorensen-Dice similarity and Matthews correlation.

Cluster indices produced by a clustering are arbitrary, so predicted labels
are first matched to the ground-truth labels by an exact assignment that
maximizes the total overlap.
"""
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

MAX_MATCHED_CLUSTERS = 10


@dataclass(frozen=True)
class ConfusionCounts:

    """One-vs-rest counts of a single class."""

    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class ClassMetrics:

    label: int
    sds: float
    mcc: float
    counts: ConfusionCounts


@dataclass
class MetricsReport:

    """SA plus macro-averaged SDS and MCC, with the per-class values.

    ``iterations`` and ``wall_time_ms`` are filled by the caller that ran the
    solver; they stay None for a bare comparison of label maps.
    """

    sa: float
    sds_macro: float
    mcc_macro: float
    per_class: List[ClassMetrics] = field(default_factory=list)
    iterations: Optional[int] = None
    wall_time_ms: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _check_maps(pred: np.ndarray, truth: np.ndarray, c: Optional[int] = None) -> None:
    if pred.shape != truth.shape:
        raise ValueError(f'Label maps differ in size: {pred.shape} and {truth.shape}')

    if c is not None:
        for name, labels in (('predicted', pred), ('ground-truth', truth)):
            if labels.size and (labels.min() < 0 or labels.max() >= c):
                raise ValueError(f'{name.capitalize()} labels must be in [0, {c - 1}]')


def _overlaps(pred: np.ndarray, truth: np.ndarray, c: int) -> np.ndarray:
    # overlaps[a, b] = |S_a intersect G_b|
    counts = np.zeros((c, c), dtype=np.int64)
    np.add.at(counts, (pred.astype(np.int64), truth.astype(np.int64)), 1)
    return counts


def match_clusters(pred: np.ndarray, truth: np.ndarray, c: int) -> np.ndarray:
    """Finds the relabeling of predicted clusters that maximizes the overlap with the ground truth.

    :param pred: predicted labels in [0, c)
    :param truth: ground-truth labels in [0, c)
    :param c: number of clusters, at most 10
    :raises ValueError: if the maps differ in size, hold labels out of range or c > 10
    :returns: an array ``mapping`` such that ``mapping[pred]`` is aligned with truth
    """
    if c > MAX_MATCHED_CLUSTERS:
        raise ValueError(f'Cluster matching is limited to {MAX_MATCHED_CLUSTERS} clusters, got {c}')

    pred = np.asarray(pred).ravel()
    truth = np.asarray(truth).ravel()
    _check_maps(pred, truth, c)

    rows, cols = linear_sum_assignment(_overlaps(pred, truth, c), maximize=True)

    mapping = np.empty(c, dtype=np.int64)
    mapping[rows] = cols
    return mapping


def align(pred: np.ndarray, truth: np.ndarray, c: int) -> np.ndarray:
    """Relabels the predicted map with :py:func:`~.match_clusters`."""
    pred = np.asarray(pred)
    return match_clusters(pred, truth, c)[pred]


def segmentation_accuracy(pred: np.ndarray, truth: np.ndarray, c: Optional[int] = None) -> float:
    """Computes SA = sum_i |S_i intersect G_i| / K on aligned maps.

    :raises ValueError: if the maps differ in size
    """
    pred = np.asarray(pred).ravel()
    truth = np.asarray(truth).ravel()
    _check_maps(pred, truth, c)

    if pred.size == 0:
        raise ValueError('Label maps are empty')

    return float(np.count_nonzero(pred == truth)) / pred.size


def confusion(pred: np.ndarray, truth: np.ndarray, positive: int) -> 'ConfusionCounts':
    """Counts true/false positives/negatives of one class against all others.

    :raises ValueError: if the maps differ in size
    """
    pred = np.asarray(pred).ravel()
    truth = np.asarray(truth).ravel()
    _check_maps(pred, truth)

    p = pred == positive
    g = truth == positive

    return ConfusionCounts(
        tp=int(np.count_nonzero(p & g)),
        fp=int(np.count_nonzero(p & ~g)),
        tn=int(np.count_nonzero(~p & ~g)),
        fn=int(np.count_nonzero(~p & g))
    )


def mcc(counts: 'ConfusionCounts') -> float:
    """Computes the Matthews correlation coefficient, 0 when a marginal is empty."""
    tp, fp, tn, fn = counts.tp, counts.fp, counts.tn, counts.fn
    denominator = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)

    if denominator == 0:
        return 0.0

    return (tp * tn - fp * fn) / math.sqrt(denominator)


def sds(counts: 'ConfusionCounts') -> float:
    """Computes the Sorensen-Dice similarity 2TP / (2TP + FP + FN), 0 when undefined."""
    denominator = 2 * counts.tp + counts.fp + counts.fn

    if denominator == 0:
        return 0.0

    return 2 * counts.tp / denominator


def report(pred: np.ndarray, truth: np.ndarray, c: int) -> 'MetricsReport':
    """Matches the clusters, then computes SA and the macro-averaged SDS and MCC.

    :param pred: predicted labels in [0, c)
    :param truth: ground-truth labels in [0, c)
    :param c: number of clusters
    :returns: the metrics report
    """
    aligned = align(np.asarray(pred).ravel(), np.asarray(truth).ravel(), c)
    truth = np.asarray(truth).ravel()

    per_class = []
    for label in range(c):
        counts = confusion(aligned, truth, label)
        per_class.append(ClassMetrics(label, sds(counts), mcc(counts), counts))

    return MetricsReport(
        sa=segmentation_accuracy(aligned, truth, c),
        sds_macro=float(np.mean([m.sds for m in per_class])),
        mcc_macro=float(np.mean([m.mcc for m in per_class])),
        per_class=per_class
    )
