"""Residual-driven fuzzy c-means with weighted l2 fidelity and spatial information (WRFCM).

The objective couples the clustering of the noise-free estimate X - R with a
weighted l2 penalty on the residual R, every term being averaged over the
local window of each pixel::

    J = sum_i sum_j u_ij^m sum_{n in N_j} s_nj ||x_n - r_n - v_i||^2
        + sum_l beta_l sum_j sum_{n in N_j} s_nj |w_nl r_nl|^2

It is minimized by a two-step iteration: with the weights W fixed, U, V and R
are updated by their closed-form minimizers, then W is recomputed from R.
"""
import logging
from dataclasses import dataclass
from enum import IntEnum
from typing import Optional, Tuple

import numpy as np

from wrfcm.config import SolverConfig
from wrfcm.fcm import (defuzzify, initial_prototypes,
                       memberships_from_distances, squared_distances,
                       weighted_prototypes)
from wrfcm.image import ImageTensor, betas_from_phi, channel_stddev
from wrfcm.neighborhood import NeighborhoodSystem, build_neighborhood
from wrfcm.trace import ConvergenceTrace

logger = logging.getLogger(__name__)


class FidelityKind(IntEnum):

    """Fidelity terms that can be evaluated on a residual."""

    L2 = 0
    L1 = 1
    IDIV = 2
    WEIGHTED_L2 = 3


class FidelityDomainError(ValueError):

    """Raised when the I-divergence is evaluated where x - r is not positive."""

    def __init__(self, pixel: int, channel: int, value: float):
        super().__init__(f'I-divergence requires x - r > 0, got {value} at pixel {pixel}, channel {channel}')
        self.pixel = pixel
        self.channel = channel


@dataclass(frozen=True)
class SolveOutput:

    """Result of a WRFCM fit.

    :param u: partition matrix (c, K)
    :param v: prototypes (c, L)
    :param r: residual (K, L)
    :param w: residual weights (K, L)
    :param labels: winning cluster of every pixel (K,)
    :param segmented: image where every pixel holds its winning prototype
    :param trace: convergence history
    """

    u: np.ndarray
    v: np.ndarray
    r: np.ndarray
    w: np.ndarray
    labels: np.ndarray
    segmented: ImageTensor
    trace: ConvergenceTrace


def _denoised(image: 'ImageTensor', r: np.ndarray) -> np.ndarray:
    return image.data - r


def _window_distances(y: np.ndarray, v: np.ndarray, nbhd: 'NeighborhoodSystem') -> np.ndarray:
    # D_ij = sum_{n in N_j} s_nj ||y_n - v_i||^2
    return nbhd.window_sum(squared_distances(y, v).T).T


def objective(image: 'ImageTensor', u: np.ndarray, v: np.ndarray, r: np.ndarray, w: np.ndarray,
              nbhd: 'NeighborhoodSystem', beta: np.ndarray, m: float = 2.0) -> float:
    """Evaluates the objective, summing each window around its center pixel.

    :param image: observed image X
    :param u: partition matrix (c, K)
    :param v: prototypes (c, L)
    :param r: residual (K, L)
    :param w: weights (K, L)
    :param nbhd: neighborhood system of the image
    :param beta: per-channel fidelity weights (L,)
    :param m: fuzzification exponent
    :returns: the objective value J
    """
    distances = _window_distances(_denoised(image, r), v, nbhd)
    data_term = np.sum(np.power(u, m) * distances)

    fidelity = nbhd.window_sum(np.square(w * r))
    fidelity_term = np.sum(fidelity * np.asarray(beta)[np.newaxis, :])

    return float(data_term + fidelity_term)


def objective_by_neighbors(image: 'ImageTensor', u: np.ndarray, v: np.ndarray, r: np.ndarray, w: np.ndarray,
                           nbhd: 'NeighborhoodSystem', beta: np.ndarray, m: float = 2.0) -> float:
    """Evaluates the objective after exchanging the roles of j and n.

    Since n is in N_j exactly when j is in N_n, the window sums can be moved
    onto the memberships: every pixel j is weighted by the memberships of its
    neighbors. Agrees with :py:func:`~.objective`.
    """
    neighbor_u = nbhd.window_sum(np.power(u, m).T).T
    data_term = np.sum(neighbor_u * squared_distances(_denoised(image, r), v))

    totals = nbhd.weight_totals[:, np.newaxis]
    fidelity_term = np.sum(totals * np.square(w * r) * np.asarray(beta)[np.newaxis, :])

    return float(data_term + fidelity_term)


def update_membership(image: 'ImageTensor', v: np.ndarray, r: np.ndarray,
                      nbhd: 'NeighborhoodSystem', m: float) -> np.ndarray:
    """Computes the partition matrix minimizing the objective for fixed V and R.

    :returns: column-stochastic array of shape (c, K)
    """
    return memberships_from_distances(_window_distances(_denoised(image, r), v, nbhd), m)


def _prototype_sums(image: 'ImageTensor', u: np.ndarray, r: np.ndarray,
                    nbhd: 'NeighborhoodSystem', m: float) -> Tuple[np.ndarray, np.ndarray]:
    um = np.power(u, m)
    neighbor_u = nbhd.window_sum(um.T).T
    numerator = neighbor_u @ _denoised(image, r)
    denominator = um @ nbhd.weight_totals

    return numerator, denominator


def update_prototypes(image: 'ImageTensor', u: np.ndarray, r: np.ndarray, nbhd: 'NeighborhoodSystem',
                      m: float, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Computes the prototypes minimizing the objective for fixed U and R.

    v_i is the mean of the windowed denoised intensities x_n - r_n weighted by
    u_ij^m s_nj. An empty cluster is reseeded from a random pixel.

    :returns: prototypes of shape (c, L)
    """
    numerator, denominator = _prototype_sums(image, u, r, nbhd, m)
    return weighted_prototypes(numerator, denominator, image, rng)[0]


def update_residual(image: 'ImageTensor', u: np.ndarray, v: np.ndarray, w: np.ndarray,
                    nbhd: 'NeighborhoodSystem', beta: np.ndarray, m: float) -> np.ndarray:
    """Computes the residual minimizing the objective for fixed U, V and W.

    The problem splits into K x L scalar quadratics. For pixel j, channel l,
    with G_ij = sum_{n in N_j} s_nj u_in^m and S_j = sum_{n in N_j} s_nj::

        r_jl = sum_i G_ij (x_jl - v_il) / (sum_i G_ij + beta_l w_jl^2 S_j)

    :raises ValueError: if a fidelity weight is negative
    :raises RuntimeError: if a window holds no membership at all
    :returns: residual of shape (K, L)
    """
    beta = np.asarray(beta, dtype=np.float64)
    if np.any(beta < 0):
        raise ValueError('Fidelity weights must be non-negative')

    neighbor_u = nbhd.window_sum(np.power(u, m).T).T
    membership_total = neighbor_u.sum(axis=0)

    if np.any(membership_total <= 0):
        raise RuntimeError('A window holds no cluster membership, the residual is undefined')

    numerator = image.data * membership_total[:, np.newaxis] - neighbor_u.T @ v
    denominator = (membership_total[:, np.newaxis]
                   + beta[np.newaxis, :] * np.square(w) * nbhd.weight_totals[:, np.newaxis])

    return numerator / denominator


def update_weights(r: np.ndarray, xi: float) -> np.ndarray:
    """Computes the residual weights w_jl = exp(-xi * r_jl^2).

    :param r: residual (K, L)
    :param xi: decay rate
    :raises ValueError: if xi is negative
    """
    if xi < 0:
        raise ValueError(f'The weight decay rate must be non-negative, got {xi}')

    return np.exp(-xi * np.square(r))


def fidelity_eval(r: np.ndarray, kind: 'FidelityKind', image: Optional['ImageTensor'] = None,
                  w: Optional[np.ndarray] = None) -> np.ndarray:
    """Evaluates a fidelity term on every channel of a residual.

    :param r: residual (K, L)
    :param kind: l2, l1, I-divergence or weighted l2
    :param image: observed image, required by the I-divergence
    :param w: residual weights, required by the weighted l2
    :raises ValueError: if a required argument is missing
    :raises FidelityDomainError: if x - r is not positive for the I-divergence
    :returns: an array of L values
    """
    r = np.asarray(r, dtype=np.float64)
    kind = FidelityKind(kind)

    if kind == FidelityKind.L2:
        return np.sum(np.square(r), axis=0)

    if kind == FidelityKind.L1:
        return np.sum(np.abs(r), axis=0)

    if kind == FidelityKind.WEIGHTED_L2:
        if w is None:
            raise ValueError('The weighted l2 fidelity requires weights')
        return np.sum(np.square(w * r), axis=0)

    if image is None:
        raise ValueError('The I-divergence requires the observed image')

    x = image.data
    y = x - r
    bad = np.argwhere(y <= 0)
    if len(bad) > 0:
        pixel, channel = (int(i) for i in bad[0])
        raise FidelityDomainError(pixel, channel, float(y[pixel, channel]))

    return np.sum(y - x * np.log(y), axis=0)


def wrfcm_fit(image: 'ImageTensor', config: 'SolverConfig', beta: Optional[np.ndarray] = None) -> 'SolveOutput':
    """Segments an image with WRFCM.

    Starts from W = 1, R = 0 and random prototypes, then repeats the updates
    of U, V, R (weights fixed) and W until the Frobenius norm of the
    membership change falls below ``config.eps``. Reaching ``config.max_iter``
    is recorded in the trace, not raised.

    :param image: observed image
    :param config: solver parameters
    :param beta: explicit fidelity weights, derived from phi and the channel
        standard deviations (in percent of the intensity range) when omitted
    :returns: the fit result
    """
    if beta is None:
        beta = betas_from_phi(config.phi, channel_stddev(image, relative=True))
    beta = np.asarray(beta, dtype=np.float64)

    nbhd = build_neighborhood(image.width, image.height, config.radius)
    rng = np.random.default_rng(config.seed)
    trace = ConvergenceTrace(config.max_iter)

    v = initial_prototypes(image, config.c, rng)
    u = np.full((config.c, image.size), 1.0 / config.c)
    r = np.zeros_like(image.data)
    w = np.ones_like(image.data)

    logger.info(f'WRFCM on {image.width}x{image.height} image, c={config.c}, beta={beta.tolist()}, xi={config.xi}')

    for t in range(config.max_iter):
        u_next = update_membership(image, v, r, nbhd, config.m)

        numerator, denominator = _prototype_sums(image, u_next, r, nbhd, config.m)
        v, empty = weighted_prototypes(numerator, denominator, image, rng)
        trace.reseeds.extend((t, i) for i in empty)

        r = update_residual(image, u_next, v, w, nbhd, beta, config.m)
        w = update_weights(r, config.xi)

        theta = float(np.linalg.norm(u_next - u))
        u = u_next

        value = objective_by_neighbors(image, u, v, r, w, nbhd, beta, config.m)
        trace.append(theta, value)
        logger.debug(f'WRFCM iteration {t}: theta={theta:.3e}, J={value:.6e}')

        if theta < config.eps:
            trace.converged = True
            break

    if trace.converged:
        logger.info(f'WRFCM converged after {trace.iterations} iterations')
    else:
        logger.warning(f'WRFCM stopped after {config.max_iter} iterations without converging')

    labels, segmented = defuzzify(u, v)

    return SolveOutput(u, v, r, w, labels, image.replace(segmented), trace)
