"""Defines the image tensor and the per-channel statistics used to derive parameters."""
from dataclasses import dataclass
from typing import Tuple

import numpy as np

MAX_INTENSITY = 255.0
"""Upper bound of the raw intensity scale; images are never normalized."""


@dataclass(frozen=True)
class ImageTensor:

    """K pixels by L channels of real intensities with a 2-D geometry.

    Pixels are stored row-major: pixel ``j`` sits at row ``j // width`` and
    column ``j % width``. The data array is made read-only on construction.
    """

    width: int
    height: int
    data: np.ndarray

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f'Image dimensions must be positive, got {self.width}x{self.height}')

        data = np.array(self.data, dtype=np.float64)
        if data.ndim == 1:
            data = data.reshape(-1, 1)

        if data.ndim != 2 or data.shape[0] != self.width * self.height:
            raise ValueError(f'Expected {self.width * self.height} pixels, got data of shape {data.shape}')

        if data.shape[1] not in (1, 3):
            raise ValueError(f'An image must have 1 or 3 channels, got {data.shape[1]}')

        if not np.all(np.isfinite(data)):
            raise ValueError('Image intensities must be finite')

        data.setflags(write=False)
        object.__setattr__(self, 'data', data)

    @classmethod
    def from_array(cls, array: np.ndarray) -> 'ImageTensor':
        """Creates a tensor from an array of shape (height, width) or (height, width, L).

        :param array: pixel array in image layout
        :returns: a new tensor
        """
        array = np.asarray(array, dtype=np.float64)
        if array.ndim == 2:
            array = array[:, :, np.newaxis]

        if array.ndim != 3:
            raise ValueError(f'Expected a 2-D or 3-D array, got {array.ndim} dimensions')

        height, width, channels = array.shape
        return cls(width, height, array.reshape(height * width, channels))

    @property
    def channels(self) -> int:
        """Number of channels L (1 for gray, 3 for RGB)."""
        return self.data.shape[1]

    @property
    def size(self) -> int:
        """Number of pixels K."""
        return self.data.shape[0]

    @property
    def shape(self) -> Tuple[int, int]:
        """Image layout (height, width), without the channel axis."""
        return (self.height, self.width)

    def as_array(self) -> np.ndarray:
        """Returns the pixels in image layout (height, width, L)."""
        return self.data.reshape(self.height, self.width, self.channels)

    def replace(self, data: np.ndarray) -> 'ImageTensor':
        """Returns a tensor with the same geometry holding other intensities."""
        return ImageTensor(self.width, self.height, data)

    def clipped(self) -> 'ImageTensor':
        """Returns a copy clamped to [0, 255]."""
        return self.replace(np.clip(self.data, 0.0, MAX_INTENSITY))

    def to_uint8(self) -> np.ndarray:
        """Rounds the clamped intensities to 8 bits, in image layout."""
        return np.rint(self.clipped().as_array()).astype(np.uint8)


def channel_stddev(image: 'ImageTensor', relative: bool = False) -> np.ndarray:
    """Computes the population standard deviation of each channel.

    A constant channel yields 0. With ``relative``, the deviation is given in
    percent of the intensity range [0, 255], a unit-free value that does not
    depend on how the intensities are scaled.

    :param image: the observed image
    :param relative: express the deviations in percent of the intensity range
    :returns: an array of L standard deviations
    """
    delta = np.std(image.data, axis=0)
    if relative:
        return delta * (100.0 / MAX_INTENSITY)

    return delta


def betas_from_phi(phi: float, delta: np.ndarray) -> np.ndarray:
    """Derives the per-channel fidelity weights with the rule beta = phi * delta / 100.

    :param phi: fidelity scale, recommended between 5 and 10
    :param delta: per-channel standard deviations, in percent of the intensity
        range when used by the solver
    :raises ValueError: if phi is negative
    :returns: an array of L fidelity weights
    """
    if phi < 0:
        raise ValueError(f'phi must be non-negative, got {phi}')

    return phi * np.asarray(delta, dtype=np.float64) / 100.0
