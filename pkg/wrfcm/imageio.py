"""Reads and writes 8-bit images and label maps."""
import logging
import os
from typing import Optional, Union

import numpy as np
from PIL import Image

from wrfcm.image import ImageTensor

PathLike = Union[str, 'os.PathLike[str]']

SUPPORTED_MODES = {'L': 1, 'RGB': 3}
"""Pillow modes that can be loaded, with their channel count."""

WIDE_MODES = ('I', 'I;16', 'I;16B', 'I;16L', 'I;16N', 'F')

WIDE_RAWMODE = ';16'
"""Marks decoder raw modes of 16-bit samples, such as RGB;16B for 48-bit PNG files."""

logger = logging.getLogger(__name__)


class UnsupportedImageError(ValueError):

    """Raised when an image file is not 8-bit gray or 8-bit RGB."""

    def __init__(self, path: PathLike, reason: str):
        super().__init__(f'{path}: {reason}')
        self.path = path


def _has_wide_samples(img: 'Image.Image') -> bool:
    # 48-bit PNG files open as RGB, only the pending decoder tiles keep the depth
    for tile in img.tile:
        args = tile[3]
        rawmode = args if isinstance(args, str) else next((a for a in args or () if isinstance(a, str)), '')
        if WIDE_RAWMODE in rawmode:
            return True

    return False


def load_image(path: PathLike) -> 'ImageTensor':
    """Loads an 8-bit grayscale (PGM/PNG) or RGB (PNG) image.

    :param path: image file
    :raises UnsupportedImageError: if the bit depth or the mode is not supported
    :raises OSError: if the file cannot be read
    :returns: a tensor holding the intensities as floats
    """
    with Image.open(path) as img:
        if img.mode in WIDE_MODES or _has_wide_samples(img):
            raise UnsupportedImageError(path, f'unsupported bit depth (mode {img.mode}), expected 8-bit data')

        if img.mode not in SUPPORTED_MODES:
            raise UnsupportedImageError(path, f'unsupported image mode {img.mode}, expected L or RGB')

        mode = img.mode
        array = np.asarray(img, dtype=np.uint8)

    logger.debug(f'Loaded {path} ({mode}, {array.shape[1]}x{array.shape[0]})')

    return ImageTensor.from_array(array)


def save_image(tensor: 'ImageTensor', path: PathLike) -> None:
    """Saves a tensor as an 8-bit image, clamping and rounding its intensities.

    The format follows the file extension (PNG, PGM, ...).
    """
    array = tensor.to_uint8()
    if tensor.channels == 1:
        array = array[:, :, 0]

    Image.fromarray(array).save(path)
    logger.info(f'Wrote {path}')


def label_levels(c: int) -> np.ndarray:
    """Gray level of every label, spread over [0, 255]."""
    if c < 2:
        return np.zeros(max(c, 1), dtype=np.uint8)

    return np.rint(np.arange(c) * 255.0 / (c - 1)).astype(np.uint8)


def save_label_map(labels: np.ndarray, c: int, width: int, height: int, path: PathLike) -> None:
    """Saves labels in [0, c) as a grayscale image with evenly spread levels."""
    labels = np.asarray(labels, dtype=np.int64).reshape(height, width)
    Image.fromarray(label_levels(c)[labels]).save(path)
    logger.info(f'Wrote {path}')


def load_label_map(path: PathLike, c: Optional[int] = None) -> np.ndarray:
    """Loads a label map saved by :py:func:`~.save_label_map`.

    With c given, every gray level must be one of :py:func:`~.label_levels`
    and is mapped back to its label. Otherwise the distinct gray levels are
    ranked.

    :raises UnsupportedImageError: if the image is not grayscale or holds a
        gray level that no label of c is stored as
    :returns: labels of shape (K,)
    """
    tensor = load_image(path)
    if tensor.channels != 1:
        raise UnsupportedImageError(path, 'a label map must be a grayscale image')

    gray = tensor.data[:, 0]

    if c is None:
        _, labels = np.unique(gray, return_inverse=True)
        return labels.astype(np.int64)

    levels = label_levels(c)
    lookup = np.full(256, -1, dtype=np.int64)
    lookup[levels] = np.arange(len(levels))

    labels = lookup[gray.astype(np.int64)]
    if np.any(labels < 0):
        unknown = np.unique(gray[labels < 0]).astype(int).tolist()
        raise UnsupportedImageError(path, f'gray levels {unknown} are not label levels for c={c}, '
                                          f'expected {levels.tolist()}')

    return labels
