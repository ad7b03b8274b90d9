"""
Kernels - Radial kernel shapes, separation weights, moments and efficiency

Every kernel is stored twice:
  * as an unnormalized shape K(u) in the kernel's own coordinate u, used for
    the KDE moments (mass, second moment, roughness, efficiency);
  * as a separation profile F(t) in t = (beta/2) * ||x - xi||^2, the summand
    of the DenseAM energy. Compact kernels use u = sqrt(t), so the support
    ends at ||x - xi|| = sqrt(2/beta). The Gaussian uses u = sqrt(2t), which
    makes its summand exp(-(beta/2) * ||x - xi||^2), the LSE summand.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Callable, Dict, Union

import numpy as np
import pandas as pd
from scipy import integrate

from densam.memory.errors import InvalidParameterError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

# Gaussian tail beyond |u| = 12 carries < 1e-30 of the mass
GAUSSIAN_CUTOFF = 12.0
QUAD_OPTIONS = {"epsabs": 1e-14, "epsrel": 1e-12, "limit": 200}


class KernelId(str, Enum):
    """Kernel identifiers, serialized as their lowercase names"""

    EPANECHNIKOV = "epanechnikov"
    GAUSSIAN = "gaussian"
    TRIANGLE = "triangle"
    UNIFORM = "uniform"
    TRIWEIGHT = "triweight"
    QUARTIC = "quartic"
    TRICUBE = "tricube"
    COSINE = "cosine"

    @property
    def compact(self) -> bool:
        return self is not KernelId.GAUSSIAN

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class KernelMoments:
    """Moments of a kernel after normalization to unit mass and unit second moment"""

    kernel: KernelId
    mu_k: float
    sigma_k: float
    efficiency: float
    mass: float


def parse_kernel(name: Union[str, KernelId]) -> KernelId:
    """
    Look up a kernel id from its serialized name

    Args:
        name: Kernel name such as 'epanechnikov' (case-insensitive) or a KernelId

    Returns:
        Matching KernelId
    """
    if isinstance(name, KernelId):
        return name
    try:
        return KernelId(str(name).strip().lower())
    except ValueError:
        valid = ", ".join(k.value for k in KernelId)
        raise InvalidParameterError(f"Unknown kernel '{name}'. Expected one of: {valid}") from None


def _relu(v: np.ndarray) -> np.ndarray:
    return np.maximum(v, 0.0)


def _inside(t: np.ndarray) -> np.ndarray:
    return t < 1.0


# Separation profiles F(t), t = (beta/2) * squared distance
_PROFILES: Dict[KernelId, Callable[[np.ndarray], np.ndarray]] = {
    KernelId.EPANECHNIKOV: lambda t: _relu(1.0 - t),
    KernelId.GAUSSIAN: lambda t: np.exp(-t),
    KernelId.TRIANGLE: lambda t: np.where(_inside(t), _relu(1.0 - np.sqrt(t)), 0.0),
    KernelId.UNIFORM: lambda t: np.where(_inside(t), 1.0, 0.0),
    KernelId.TRIWEIGHT: lambda t: _relu(1.0 - t) ** 3,
    KernelId.QUARTIC: lambda t: _relu(1.0 - t) ** 2,
    KernelId.TRICUBE: lambda t: np.where(_inside(t), _relu(1.0 - t * np.sqrt(t)) ** 3, 0.0),
    KernelId.COSINE: lambda t: np.where(_inside(t), np.cos(0.5 * np.pi * np.sqrt(np.minimum(t, 1.0))), 0.0),
}


def _triangle_slope(t: np.ndarray) -> np.ndarray:
    root = np.sqrt(t)
    safe = np.where(root > 0.0, root, 1.0)
    # cusp at t = 0: subgradient 0
    return np.where(_inside(t) & (root > 0.0), -0.5 / safe, 0.0)


def _tricube_slope(t: np.ndarray) -> np.ndarray:
    s = np.sqrt(t)
    return np.where(_inside(t), -4.5 * s * (1.0 - s**3) ** 2, 0.0)


def _cosine_slope(t: np.ndarray) -> np.ndarray:
    s = np.sqrt(np.minimum(t, 1.0))
    return np.where(_inside(t), -(np.pi**2 / 8.0) * np.sinc(0.5 * s), 0.0)


# dF/dt for each profile
_SLOPES: Dict[KernelId, Callable[[np.ndarray], np.ndarray]] = {
    KernelId.EPANECHNIKOV: lambda t: np.where(_inside(t), -1.0, 0.0),
    KernelId.GAUSSIAN: lambda t: -np.exp(-t),
    KernelId.TRIANGLE: _triangle_slope,
    KernelId.UNIFORM: lambda t: np.zeros_like(t),
    KernelId.TRIWEIGHT: lambda t: -3.0 * _relu(1.0 - t) ** 2,
    KernelId.QUARTIC: lambda t: -2.0 * _relu(1.0 - t),
    KernelId.TRICUBE: _tricube_slope,
    KernelId.COSINE: _cosine_slope,
}


def _as_output(value: np.ndarray, like: ArrayLike) -> ArrayLike:
    if np.ndim(like) == 0:
        return float(value)
    return value


def _check_beta(beta: float) -> None:
    if not (beta > 0 and math.isfinite(beta)):
        raise InvalidParameterError(f"beta must be positive and finite, got {beta}")


def kernel_shape(kernel: Union[str, KernelId], u: ArrayLike) -> ArrayLike:
    """
    Evaluate the unnormalized kernel shape K(u)

    Args:
        kernel: Kernel id or name
        u: Scalar or array of kernel coordinates

    Returns:
        Shape value(s); compact kernels are exactly 0 for |u| >= 1
    """
    kernel = parse_kernel(kernel)
    arr = np.asarray(u, dtype=float)
    if kernel is KernelId.GAUSSIAN:
        values = np.exp(-0.5 * arr * arr)
    else:
        values = _PROFILES[kernel](arr * arr)
    return _as_output(values, u)


def separation_profile(kernel: Union[str, KernelId], t: ArrayLike) -> ArrayLike:
    """Separation weight F(t) as a function of t = (beta/2) * squared distance"""
    kernel = parse_kernel(kernel)
    arr = np.asarray(t, dtype=float)
    return _as_output(_PROFILES[kernel](arr), t)


def kernel_shape_derivative(kernel: Union[str, KernelId], t: ArrayLike) -> ArrayLike:
    """Derivative dF/dt of the separation profile; 0 outside the support"""
    kernel = parse_kernel(kernel)
    arr = np.asarray(t, dtype=float)
    return _as_output(_SLOPES[kernel](arr), t)


def separation_weight(kernel: Union[str, KernelId], beta: float, sqdist: ArrayLike) -> ArrayLike:
    """
    Energy summand weight F(beta * S) with S = -sqdist/2

    Args:
        kernel: Kernel id or name
        beta: Inverse temperature (> 0)
        sqdist: Squared Euclidean distance(s) between query and pattern

    Returns:
        relu(1 - (beta/2) * sqdist) for Epanechnikov,
        exp(-(beta/2) * sqdist) for Gaussian
    """
    kernel = parse_kernel(kernel)
    _check_beta(beta)
    t = (beta / 2) * np.asarray(sqdist, dtype=float)
    return _as_output(_PROFILES[kernel](t), sqdist)


def support_radius(kernel: Union[str, KernelId], beta: float) -> float:
    """
    Euclidean distance at which the separation weight first reaches zero

    Returns:
        sqrt(2/beta) for every compact kernel, math.inf for Gaussian
    """
    kernel = parse_kernel(kernel)
    _check_beta(beta)
    if not kernel.compact:
        return math.inf
    return math.sqrt(2.0 / beta)


def _half_line_integral(func: Callable[[float], float], upper: float) -> float:
    value, abserr = integrate.quad(func, 0.0, upper, **QUAD_OPTIONS)
    logger.debug(f"quad on [0, {upper}] = {value:.15g} (abserr {abserr:.2e})")
    return 2.0 * value


@lru_cache(maxsize=None)
def _raw_moments(kernel: KernelId) -> tuple:
    upper = GAUSSIAN_CUTOFF if kernel is KernelId.GAUSSIAN else 1.0

    def shape(u: float) -> float:
        return float(kernel_shape(kernel, u))

    mass = _half_line_integral(shape, upper)
    second = _half_line_integral(lambda u: u * u * shape(u), upper) / mass
    rough = _half_line_integral(lambda u: shape(u) ** 2, upper) / mass**2
    return mass, second, rough, upper


@lru_cache(maxsize=None)
def kernel_moments(kernel: Union[str, KernelId]) -> KernelMoments:
    """
    Compute mu_K, sigma_K and the efficiency relative to Epanechnikov

    The shape is normalized to unit mass and rescaled to unit second moment
    before sigma_K = integral of K^2 is taken, so the shape's own scale never
    affects the efficiency.

    Args:
        kernel: Kernel id or name

    Returns:
        KernelMoments with mu_k ~ 1, sigma_k and efficiency in (0, 1]
    """
    kernel = parse_kernel(kernel)
    mass, second, _, upper = _raw_moments(kernel)
    scale = math.sqrt(second)

    def rescaled(v: float) -> float:
        return scale * float(kernel_shape(kernel, scale * v)) / mass

    # rescaled kernel lives on [-upper/scale, upper/scale]
    limit = upper / scale
    unit_mass = _half_line_integral(rescaled, limit)
    mu_k = _half_line_integral(lambda v: v * v * rescaled(v), limit)
    sigma_k = _half_line_integral(lambda v: rescaled(v) ** 2, limit)

    if kernel is KernelId.EPANECHNIKOV:
        efficiency = 1.0
    else:
        efficiency = kernel_moments(KernelId.EPANECHNIKOV).sigma_k / sigma_k

    logger.debug(f"{kernel}: mu_k={mu_k:.12f} sigma_k={sigma_k:.12f} efficiency={efficiency:.6f}")
    return KernelMoments(kernel=kernel, mu_k=mu_k, sigma_k=sigma_k, efficiency=efficiency, mass=unit_mass)


def optimal_bandwidth(kernel: Union[str, KernelId, KernelMoments], m: int, roughness: float) -> float:
    """
    MISE-optimal bandwidth h* = (4 sigma_K / (m mu_K^2 roughness))^(1/5)

    Args:
        kernel: Kernel id/name, or precomputed KernelMoments
        m: Number of samples (>= 1)
        roughness: Integral of |f''|^2 of the target density (> 0)

    Returns:
        Optimal bandwidth in the unit-second-moment scale of the kernel
    """
    moments = kernel if isinstance(kernel, KernelMoments) else kernel_moments(kernel)
    if m < 1:
        raise InvalidParameterError(f"m must be >= 1, got {m}")
    if not roughness > 0:
        raise InvalidParameterError(f"roughness must be positive, got {roughness}")
    return (moments.sigma_k * 4.0 / (m * moments.mu_k**2 * roughness)) ** 0.2


def optimal_mise(kernel: Union[str, KernelId, KernelMoments], m: int, roughness: float) -> float:
    """Leading-order MISE at h*: (5/4) * (sqrt(mu_K) sigma_K roughness / m)^(4/5)"""
    moments = kernel if isinstance(kernel, KernelMoments) else kernel_moments(kernel)
    if m < 1:
        raise InvalidParameterError(f"m must be >= 1, got {m}")
    if not roughness > 0:
        raise InvalidParameterError(f"roughness must be positive, got {roughness}")
    return 1.25 * (math.sqrt(moments.mu_k) * moments.sigma_k * roughness / m) ** 0.8


def kernel_table() -> pd.DataFrame:
    """Moments and efficiency of every kernel, most efficient first"""
    rows = []
    for kernel in KernelId:
        moments = kernel_moments(kernel)
        rows.append(
            {
                "kernel": kernel.value,
                "mu_k": moments.mu_k,
                "sigma_k": moments.sigma_k,
                "efficiency": moments.efficiency,
                "compact": kernel.compact,
            }
        )
    table = pd.DataFrame(rows)
    return table.sort_values(["efficiency", "kernel"], ascending=[False, True]).reset_index(drop=True)
