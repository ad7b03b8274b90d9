"""
Gaussian Mixtures - Equal-weight isotropic mixtures used as generative ground truth
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from densam.memory.errors import InvalidParameterError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GaussianMixture:
    """
    Mixture (1/k) sum_i N(mu_i, sigma^2 I)

    Attributes:
        means: k x d component means
        sigma: Shared isotropic standard deviation
    """

    means: np.ndarray
    sigma: float = 0.1

    def __post_init__(self):
        means = np.array(self.means, dtype=float, ndmin=2)
        if means.ndim != 2 or means.shape[0] < 1:
            raise InvalidParameterError(f"Mixture means must form a k x d matrix, got shape {means.shape}")
        if not self.sigma > 0:
            raise InvalidParameterError(f"sigma must be positive, got {self.sigma}")
        means.setflags(write=False)
        object.__setattr__(self, "means", means)

    @property
    def k(self) -> int:
        return self.means.shape[0]

    @property
    def d(self) -> int:
        return self.means.shape[1]

    @classmethod
    def random(cls, k: int, d: int, sigma: float = 0.1, seed: int = 0) -> "GaussianMixture":
        """Mixture whose means are drawn uniformly from [0, 1]^d"""
        if k < 1 or d < 1:
            raise InvalidParameterError(f"k and d must be >= 1, got k={k}, d={d}")
        rng = np.random.Generator(np.random.PCG64(seed))
        return cls(means=rng.random((k, d)), sigma=sigma)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw n points: a uniformly chosen component, then isotropic noise"""
        components = rng.integers(self.k, size=n)
        return self.means[components] + self.sigma * rng.standard_normal((n, self.d))

    def logpdf(self, points: np.ndarray) -> np.ndarray:
        """Log density at each row of points"""
        points = np.array(points, dtype=float, ndmin=2)
        diff = points[:, None, :] - self.means[None, :, :]
        sqd = np.einsum("nkd,nkd->nk", diff, diff)
        log_norm = -0.5 * self.d * math.log(2 * math.pi * self.sigma**2)
        component = log_norm - sqd / (2 * self.sigma**2)
        return logsumexp(component, axis=1) - math.log(self.k)


def gmm_logpdf(x, mix: GaussianMixture) -> float:
    """log p(x) for a single point, max-shifted through logsumexp"""
    return float(mix.logpdf(np.atleast_1d(np.asarray(x, dtype=float)).reshape(1, -1))[0])
