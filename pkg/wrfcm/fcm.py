"""Classical fuzzy c-means and the alternating-minimization pieces shared with WRFCM."""
import logging
from typing import List, Optional, Tuple

import numpy as np

from wrfcm.config import SolverConfig
from wrfcm.image import ImageTensor
from wrfcm.trace import ConvergenceTrace

logger = logging.getLogger(__name__)


def memberships_from_distances(distances: np.ndarray, m: float) -> np.ndarray:
    """Turns cluster-to-pixel distances into memberships.

    u_ij is proportional to D_ij^(-1/(m-1)). When a pixel has zero distance to
    some clusters, its membership is split equally among them.

    :param distances: non-negative array of shape (c, K)
    :param m: fuzzification exponent (> 1)
    :returns: column-stochastic array of shape (c, K)
    """
    if m <= 1:
        raise ValueError(f'The fuzzification exponent must be greater than 1, got {m}')

    distances = np.maximum(distances, 0.0)
    zero = distances == 0.0
    degenerate = zero.any(axis=0)

    u = np.empty_like(distances)

    regular = ~degenerate
    if np.any(regular):
        d = distances[:, regular]
        # Scaling by the column minimum keeps the powers within range
        ratio = np.power(d / d.min(axis=0), -1.0 / (m - 1.0))
        u[:, regular] = ratio / ratio.sum(axis=0)

    if np.any(degenerate):
        z = zero[:, degenerate].astype(np.float64)
        u[:, degenerate] = z / z.sum(axis=0)

    return u


def weighted_prototypes(numerator: np.ndarray, denominator: np.ndarray, image: 'ImageTensor',
                        rng: Optional[np.random.Generator] = None) -> Tuple[np.ndarray, List[int]]:
    """Divides prototype sums, reseeding clusters whose denominator vanished.

    An empty cluster gets the intensities of a random pixel.

    :param numerator: weighted intensity sums of shape (c, L)
    :param denominator: weight sums of shape (c,)
    :param image: image the random pixels are taken from
    :param rng: generator used for reseeding
    :returns: the prototypes of shape (c, L) and the indices of reseeded clusters
    """
    empty = [int(i) for i in np.flatnonzero(~(denominator > 0))]

    v = np.empty_like(numerator)
    full = denominator > 0
    v[full] = numerator[full] / denominator[full, np.newaxis]

    if empty:
        rng = rng if rng is not None else np.random.default_rng()
        for i in empty:
            v[i] = image.data[rng.integers(image.size)]
        logger.warning(f'Reseeded empty clusters {empty}')

    return v, empty


def initial_prototypes(image: 'ImageTensor', c: int, rng: np.random.Generator) -> np.ndarray:
    """Draws c distinct intensity vectors of the image as starting prototypes.

    If the image holds fewer than c distinct values, pixels are drawn instead.

    :returns: an array of shape (c, L)
    """
    values = np.unique(image.data, axis=0)

    if len(values) >= c:
        return values[rng.choice(len(values), size=c, replace=False)].copy()

    logger.warning(f'Image holds {len(values)} distinct values for {c} clusters')
    return image.data[rng.choice(image.size, size=c, replace=c > image.size)].copy()


def squared_distances(points: np.ndarray, prototypes: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances between prototypes (c, L) and points (K, L), shape (c, K)."""
    diff = points[np.newaxis, :, :] - prototypes[:, np.newaxis, :]
    return np.einsum('ckl,ckl->ck', diff, diff)


def fcm_membership(image: 'ImageTensor', prototypes: np.ndarray, m: float) -> np.ndarray:
    """Computes the FCM partition matrix for fixed prototypes.

    :param image: observed image
    :param prototypes: array of shape (c, L)
    :param m: fuzzification exponent
    :returns: column-stochastic partition matrix of shape (c, K)
    """
    return memberships_from_distances(squared_distances(image.data, prototypes), m)


def _fcm_prototype_sums(image: 'ImageTensor', u: np.ndarray, m: float) -> Tuple[np.ndarray, np.ndarray]:
    um = np.power(u, m)
    return um @ image.data, um.sum(axis=1)


def fcm_prototypes(image: 'ImageTensor', u: np.ndarray, m: float,
                   rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Computes the FCM prototypes, weighted means with weights u_ij^m.

    A cluster without any membership is reseeded from a random pixel.

    :param image: observed image
    :param u: partition matrix of shape (c, K)
    :param m: fuzzification exponent
    :param rng: generator used when a cluster must be reseeded
    :returns: prototypes of shape (c, L)
    """
    numerator, denominator = _fcm_prototype_sums(image, u, m)
    return weighted_prototypes(numerator, denominator, image, rng)[0]


def fcm_objective(image: 'ImageTensor', u: np.ndarray, prototypes: np.ndarray, m: float) -> float:
    """Evaluates sum_i sum_j u_ij^m ||x_j - v_i||^2."""
    return float(np.sum(np.power(u, m) * squared_distances(image.data, prototypes)))


def defuzzify(u: np.ndarray, prototypes: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Assigns every pixel to its cluster of highest membership.

    Ties are broken by the lowest cluster index.

    :returns: labels of shape (K,) and the segmented intensities of shape (K, L)
    """
    labels = np.argmax(u, axis=0)
    return labels, prototypes[labels]


def fcm_fit(image: 'ImageTensor', config: 'SolverConfig') -> Tuple[np.ndarray, np.ndarray, 'ConvergenceTrace']:
    """Clusters an image with classical FCM.

    Memberships and prototypes are alternated from random prototypes until the
    Frobenius norm of the membership change falls below ``config.eps`` or
    ``config.max_iter`` iterations have run.

    :param image: observed image
    :param config: solver parameters (phi, xi and radius are not used)
    :returns: the partition matrix, the prototypes and the convergence trace
    """
    rng = np.random.default_rng(config.seed)
    trace = ConvergenceTrace(config.max_iter)

    v = initial_prototypes(image, config.c, rng)
    u = np.full((config.c, image.size), 1.0 / config.c)

    logger.info(f'FCM on {image.width}x{image.height} image, c={config.c}, m={config.m}')

    for t in range(config.max_iter):
        u_next = fcm_membership(image, v, config.m)

        numerator, denominator = _fcm_prototype_sums(image, u_next, config.m)
        v, empty = weighted_prototypes(numerator, denominator, image, rng)
        trace.reseeds.extend((t, i) for i in empty)

        theta = float(np.linalg.norm(u_next - u))
        u = u_next

        objective = fcm_objective(image, u, v, config.m)
        trace.append(theta, objective)
        logger.debug(f'FCM iteration {t}: theta={theta:.3e}, J={objective:.6e}')

        if theta < config.eps:
            trace.converged = True
            break

    if not trace.converged:
        logger.warning(f'FCM stopped after {config.max_iter} iterations without converging')

    return u, v, trace
