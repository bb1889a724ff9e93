"""Generates piecewise-constant test images with exact ground truth."""
import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Optional, Tuple

import numpy as np

from wrfcm.image import MAX_INTENSITY, ImageTensor


class Geometry(IntEnum):

    """Layout of the regions of a synthetic image."""

    BLOCKS = 0
    STRIPES = 1
    CIRCLES = 2


DEFAULT_LEVELS = {
    3: (0.0, 128.0, 255.0),
    4: (0.0, 85.0, 170.0, 255.0)
}


@dataclass(frozen=True)
class SyntheticSpec:

    """Description of a synthetic image.

    :param width: width in pixels
    :param height: height in pixels
    :param levels: gray level of every region, one region per level
    :param geometry: blocks on a grid, vertical stripes or concentric discs
    :param stripe_widths: widths of the stripes, equal split when omitted
    """

    width: int
    height: int
    levels: Tuple[float, ...] = DEFAULT_LEVELS[4]
    geometry: Geometry = Geometry.BLOCKS
    stripe_widths: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f'Image dimensions must be positive, got {self.width}x{self.height}')

        if len(self.levels) < 1:
            raise ValueError('A synthetic image needs at least one region level')

        if len(set(self.levels)) != len(self.levels):
            raise ValueError(f'Region levels must be distinct, got {self.levels}')

        if any(level < 0 or level > MAX_INTENSITY for level in self.levels):
            raise ValueError(f'Region levels must be in [0, 255], got {self.levels}')

        object.__setattr__(self, 'levels', tuple(float(level) for level in self.levels))
        object.__setattr__(self, 'geometry', Geometry(self.geometry))

    @property
    def c(self) -> int:
        return len(self.levels)


def _split(total: int, parts: int) -> np.ndarray:
    # Boundaries of `parts` nearly equal intervals of [0, total)
    return np.rint(np.linspace(0, total, parts + 1)).astype(int)


def _blocks(spec: 'SyntheticSpec') -> np.ndarray:
    rows = int(math.floor(math.sqrt(spec.c)))
    cols = int(math.ceil(spec.c / rows))
    labels = np.empty((spec.height, spec.width), dtype=np.int64)

    label = 0
    row_edges = _split(spec.height, rows)
    for ri in range(rows):
        cells = cols if ri < rows - 1 else spec.c - cols * (rows - 1)
        col_edges = _split(spec.width, cells)
        for ci in range(cells):
            labels[row_edges[ri]:row_edges[ri + 1], col_edges[ci]:col_edges[ci + 1]] = label
            label += 1

    return labels


def _stripes(spec: 'SyntheticSpec') -> np.ndarray:
    if spec.stripe_widths is None:
        edges = _split(spec.width, spec.c)
    else:
        widths = tuple(spec.stripe_widths)
        if len(widths) != spec.c or any(wd < 1 for wd in widths) or sum(widths) != spec.width:
            raise ValueError(f'Stripe widths {widths} must be {spec.c} positive widths summing to {spec.width}')
        edges = np.concatenate(([0], np.cumsum(widths)))

    columns = np.searchsorted(edges, np.arange(spec.width), side='right') - 1
    return np.tile(columns, (spec.height, 1)).astype(np.int64)


def _circles(spec: 'SyntheticSpec') -> np.ndarray:
    rr, cc = np.mgrid[0:spec.height, 0:spec.width]
    distance = np.hypot(rr - (spec.height - 1) / 2.0, cc - (spec.width - 1) / 2.0)
    outer = min(spec.width, spec.height) / 2.0

    # Label 0 is the background, label k lies inside the k-th nested disc
    labels = np.zeros((spec.height, spec.width), dtype=np.int64)
    for k in range(1, spec.c):
        labels[distance < outer * (spec.c - k) / spec.c] = k

    return labels


def gen_synthetic(spec: 'SyntheticSpec') -> Tuple['ImageTensor', np.ndarray]:
    """Builds a piecewise-constant image and its label map.

    :param spec: layout and levels of the regions
    :raises ValueError: if a region would be empty
    :returns: the clean image and the ground-truth labels of shape (K,)
    """
    if spec.geometry == Geometry.BLOCKS:
        labels = _blocks(spec)
    elif spec.geometry == Geometry.STRIPES:
        labels = _stripes(spec)
    else:
        labels = _circles(spec)

    labels = labels.ravel()
    present = np.bincount(labels, minlength=spec.c)
    if np.any(present == 0):
        raise ValueError(f'A {spec.width}x{spec.height} image is too small for {spec.c} regions')

    levels = np.asarray(spec.levels)
    return ImageTensor(spec.width, spec.height, levels[labels]), labels
