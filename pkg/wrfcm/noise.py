"""Synthesizes observed images under Poisson, Gaussian and impulse noise.

The pipeline follows the acquisition model: the clean image is first
corrupted by Poisson noise, then zero-mean Gaussian noise is added, finally a
Bernoulli trial per pixel replaces some pixels with impulse noise.
"""
import logging
from dataclasses import dataclass
from enum import IntEnum
from typing import List

import numpy as np

from wrfcm.image import MAX_INTENSITY, ImageTensor

logger = logging.getLogger(__name__)


class ImpulseKind(IntEnum):

    """Kind of value written into impulse-corrupted pixels."""

    RANDOM_VALUED = 0
    SALT_AND_PEPPER = 1


@dataclass(frozen=True)
class NoiseSpec:

    """Parameters of the mixed noise model.

    :param poisson: whether Poisson noise (rate = clean intensity) is applied
    :param sigma: standard deviation of the additive Gaussian noise
    :param impulse_p: probability of a pixel to be replaced by impulse noise
    :param impulse_kind: values used for the replacement
    :param seed: seed of the random streams
    """

    poisson: bool = False
    sigma: float = 0.0
    impulse_p: float = 0.0
    impulse_kind: ImpulseKind = ImpulseKind.RANDOM_VALUED
    seed: int = 0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError(f'Gaussian sigma must be non-negative, got {self.sigma}')

        if not 0 <= self.impulse_p < 1:
            raise ValueError(f'Impulse probability must be in [0, 1), got {self.impulse_p}')

        object.__setattr__(self, 'impulse_kind', ImpulseKind(self.impulse_kind))


@dataclass(frozen=True)
class NoiseRealization:

    """Observed image and the pixels the impulse stage replaced.

    The observed tensor is not clamped: it equals the clean image plus the
    drawn noise exactly. Use :py:meth:`~wrfcm.image.ImageTensor.clipped` for
    the 8-bit view.
    """

    observed: ImageTensor
    impulse_mask: np.ndarray


def _streams(seed: int) -> List[np.random.Generator]:
    # Counter-based streams: one independent child per pipeline stage.
    children = np.random.SeedSequence(seed).spawn(4)
    return [np.random.Generator(np.random.Philox(child)) for child in children]


def corrupt_with_mask(clean: 'ImageTensor', spec: 'NoiseSpec') -> 'NoiseRealization':
    """Corrupts a clean image and reports the impulse-replaced pixels.

    :param clean: noise-free image with intensities in [0, 255]
    :param spec: noise parameters
    :raises ValueError: if a clean intensity is outside of [0, 255]
    :returns: the observed image and a boolean mask of shape (K,)
    """
    x = clean.data
    if np.any(x < 0) or np.any(x > MAX_INTENSITY):
        raise ValueError('Clean intensities must be in [0, 255] to be used as Poisson rates')

    poisson_rng, gauss_rng, mask_rng, value_rng = _streams(spec.seed)

    if spec.poisson:
        observed = poisson_rng.poisson(x).astype(np.float64)
    else:
        observed = x.copy()

    if spec.sigma > 0:
        observed += gauss_rng.normal(0.0, spec.sigma, size=x.shape)

    mask = mask_rng.random(clean.size) < spec.impulse_p
    count = int(np.count_nonzero(mask))

    if count > 0:
        if spec.impulse_kind == ImpulseKind.RANDOM_VALUED:
            observed[mask] = value_rng.uniform(0.0, MAX_INTENSITY, size=(count, clean.channels))
        else:
            # One draw per pixel, shared by its channels
            salt = value_rng.integers(0, 2, size=count) * MAX_INTENSITY
            observed[mask] = salt[:, np.newaxis]

    logger.debug(f'Corrupted {clean.width}x{clean.height} image, {count} impulse pixels')

    return NoiseRealization(clean.replace(observed), mask)


def corrupt(clean: 'ImageTensor', spec: 'NoiseSpec') -> 'ImageTensor':
    """Corrupts a clean image with mixed noise.

    It is an alias of :py:func:`~.corrupt_with_mask` returning only the observed image.
    """
    return corrupt_with_mask(clean, spec).observed
