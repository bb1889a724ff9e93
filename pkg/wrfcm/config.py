"""Defines the solver parameters shared by FCM and WRFCM."""
import logging
from dataclasses import asdict, dataclass
from typing import Any, Dict

PHI_RECOMMENDED = (5.0, 10.0)
"""Range in which the fidelity scale phi gives stable segmentations."""

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverConfig:

    """Parameters of a clustering run.

    :param c: number of clusters
    :param m: fuzzification exponent
    :param eps: threshold on the Frobenius norm of the membership change
    :param xi: decay rate of the residual weights
    :param phi: fidelity scale, beta_l = phi * delta_l / 100 with delta_l the
        channel standard deviation in percent of the intensity range
    :param radius: window radius (1 gives 3x3 windows)
    :param max_iter: maximal number of iterations
    :param seed: seed of the prototype initialization
    """

    c: int
    m: float = 2.0
    eps: float = 1e-6
    xi: float = 0.0008
    phi: float = 7.5
    radius: int = 1
    max_iter: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.c < 1:
            raise ValueError(f'The number of clusters must be at least 1, got {self.c}')

        if self.m <= 1:
            raise ValueError(f'The fuzzification exponent must be greater than 1, got {self.m}')

        if self.eps <= 0:
            raise ValueError(f'The convergence threshold must be positive, got {self.eps}')

        if self.xi < 0:
            raise ValueError(f'The weight decay rate must be non-negative, got {self.xi}')

        if self.phi < 0:
            raise ValueError(f'phi must be non-negative, got {self.phi}')

        if self.radius < 0:
            raise ValueError(f'The window radius must be non-negative, got {self.radius}')

        if self.max_iter < 1:
            raise ValueError(f'max_iter must be at least 1, got {self.max_iter}')

        low, high = PHI_RECOMMENDED
        if not low <= self.phi <= high:
            logger.warning(f'phi={self.phi} is outside of the recommended range [{low}, {high}]')

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)
