"""Defines local windows and spatial weights around every pixel."""
from dataclasses import dataclass
from functools import cached_property
from typing import Tuple

import numpy as np
from scipy import ndimage


@dataclass(frozen=True)
class NeighborhoodSystem:

    """Square windows of radius ``radius`` centered on every pixel.

    Windows are truncated at the image borders (no padding), which keeps the
    relation "n is a neighbor of j" symmetric. Each neighbor carries the
    spatial weight ``1 / (1 + d)`` where ``d`` is the Euclidean distance
    between pixel coordinates; the center pixel has weight 1.
    """

    width: int
    height: int
    radius: int

    @cached_property
    def kernel(self) -> np.ndarray:
        """Spatial weights of a full window, shape (2 * radius + 1, 2 * radius + 1)."""
        offsets = np.arange(-self.radius, self.radius + 1)
        dy, dx = np.meshgrid(offsets, offsets, indexing='ij')
        return 1.0 / (1.0 + np.hypot(dy, dx))

    @cached_property
    def weight_totals(self) -> np.ndarray:
        """Sum of the spatial weights of each (truncated) window, shape (K,)."""
        return self.window_sum(np.ones(self.width * self.height))

    @property
    def size(self) -> int:
        """Number of pixels K covered by the system."""
        return self.width * self.height

    def neighbors(self, j: int) -> Tuple[np.ndarray, np.ndarray]:
        """Lists the neighbors of a pixel in row-major order.

        :param j: row-major pixel index
        :raises IndexError: if j is not a pixel of the image
        :returns: neighbor indices and their spatial weights
        """
        if j < 0 or j >= self.size:
            raise IndexError(f'Pixel {j} is outside of a {self.width}x{self.height} image')

        row, col = divmod(j, self.width)
        rows = np.arange(max(0, row - self.radius), min(self.height, row + self.radius + 1))
        cols = np.arange(max(0, col - self.radius), min(self.width, col + self.radius + 1))
        rr, cc = np.meshgrid(rows, cols, indexing='ij')

        indices = (rr * self.width + cc).ravel()
        weights = 1.0 / (1.0 + np.hypot(rr - row, cc - col).ravel())

        return indices, weights

    def window_sum(self, values: np.ndarray) -> np.ndarray:
        """Computes sum over n in N_j of s_nj * values[n] for every pixel j.

        :param values: per-pixel values of shape (K,) or (K, n)
        :returns: an array with the same shape as values
        """
        values = np.asarray(values, dtype=np.float64)
        squeeze = values.ndim == 1
        if squeeze:
            values = values[:, np.newaxis]

        planes = values.reshape(self.height, self.width, -1)
        summed = ndimage.correlate(planes, self.kernel[:, :, np.newaxis], mode='constant', cval=0.0)
        summed = summed.reshape(self.size, -1)

        return summed[:, 0] if squeeze else summed


def build_neighborhood(width: int, height: int, radius: int = 1) -> 'NeighborhoodSystem':
    """Creates the neighborhood system of an image.

    :param width: image width in pixels
    :param height: image height in pixels
    :param radius: window radius, 1 gives 3x3 windows
    :raises ValueError: if a dimension is not positive or the radius is negative
    :returns: the neighborhood system
    """
    if width < 1 or height < 1:
        raise ValueError(f'Image dimensions must be positive, got {width}x{height}')

    if radius < 0:
        raise ValueError(f'Window radius must be non-negative, got {radius}')

    return NeighborhoodSystem(width, height, radius)
