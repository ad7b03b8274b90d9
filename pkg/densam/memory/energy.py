"""
Energy Landscape - LSR and LSE energies, gradients, active sets and support

E_LSR(x) = -(1/beta) log(eps + sum_mu F((beta/2) ||x - xi_mu||^2)) with a compact F
E_LSE(x) = -(1/beta) log sum_mu exp(-(beta/2) ||x - xi_mu||^2)
"""

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple, Tuple, Union

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import logsumexp, softmax

from densam.memory.errors import InvalidParameterError
from densam.memory.kernels import (
    KernelId,
    kernel_shape_derivative,
    parse_kernel,
    separation_profile,
    support_radius,
)
from densam.memory.patterns import PatternSet

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EnergySpec:
    """Kernel, inverse temperature and floor constant of an energy landscape"""

    kernel: Union[KernelId, str] = KernelId.EPANECHNIKOV
    beta: float = 1.0
    epsilon: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kernel", parse_kernel(self.kernel))
        if not (self.beta > 0 and math.isfinite(self.beta)):
            raise InvalidParameterError(f"beta must be positive and finite, got {self.beta}")
        if not (self.epsilon >= 0 and math.isfinite(self.epsilon)):
            raise InvalidParameterError(f"epsilon must be >= 0, got {self.epsilon}")

    @property
    def radius(self) -> float:
        """Support radius sqrt(2/beta) (infinite for the Gaussian kernel)"""
        return support_radius(self.kernel, self.beta)

    def with_beta(self, beta: float) -> "EnergySpec":
        return EnergySpec(kernel=self.kernel, beta=beta, epsilon=self.epsilon)


@dataclass(frozen=True)
class ActiveSet:
    """Indices of the patterns whose support ball strictly contains center"""

    indices: Tuple[int, ...]
    center: np.ndarray

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __contains__(self, index: int) -> bool:
        return index in self.indices


class GradientState(NamedTuple):
    """LSR gradient together with its supportedness flag and active indices"""

    vector: np.ndarray
    supported: bool
    active: Tuple[int, ...]


def _as_query(x, patterns: PatternSet) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.shape != (patterns.d,):
        raise InvalidParameterError(f"Query must have shape ({patterns.d},), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidParameterError("Query contains non-finite coordinates")
    return arr


def _require_compact(spec: EnergySpec, operation: str) -> None:
    if not spec.kernel.compact:
        raise InvalidParameterError(f"{operation} needs a compact-support kernel, got {spec.kernel}")


def _require_gaussian(spec: EnergySpec, operation: str) -> None:
    if spec.kernel is not KernelId.GAUSSIAN:
        raise InvalidParameterError(f"{operation} needs the gaussian kernel, got {spec.kernel}")


def _scaled_sqdist(x: np.ndarray, patterns: PatternSet, spec: EnergySpec) -> np.ndarray:
    return (spec.beta / 2) * patterns.squared_distances(x)


def active_set(x, patterns: PatternSet, spec: EnergySpec) -> ActiveSet:
    """
    Patterns whose support ball strictly contains x

    A pattern is active iff (beta/2) ||x - xi||^2 < 1, i.e. exactly when its
    separation weight is positive. Under the Gaussian kernel every pattern is active.

    Args:
        x: Query point (d-vector)
        patterns: Stored patterns
        spec: Energy specification

    Returns:
        ActiveSet with sorted indices
    """
    x = _as_query(x, patterns)
    if not spec.kernel.compact:
        return ActiveSet(indices=tuple(range(patterns.m)), center=x)
    t = _scaled_sqdist(x, patterns, spec)
    return ActiveSet(indices=tuple(int(i) for i in np.flatnonzero(t < 1.0)), center=x)


def lsr_energy(x, patterns: PatternSet, spec: EnergySpec) -> float:
    """
    Log-sum-ReLU energy (any compact kernel)

    Returns:
        -(1/beta) log(eps + sum of weights); +inf where eps = 0 and no pattern is active
    """
    _require_compact(spec, "lsr_energy")
    x = _as_query(x, patterns)
    weights = separation_profile(spec.kernel, _scaled_sqdist(x, patterns, spec))
    total = spec.epsilon + float(np.sum(weights))
    if total <= 0.0:
        return math.inf
    return -math.log(total) / spec.beta


def lse_energy(x, patterns: PatternSet, spec: EnergySpec) -> float:
    """Log-sum-exp energy, max-shifted through scipy's logsumexp"""
    _require_gaussian(spec, "lse_energy")
    x = _as_query(x, patterns)
    return -float(logsumexp(-_scaled_sqdist(x, patterns, spec))) / spec.beta


def energy(x, patterns: PatternSet, spec: EnergySpec) -> float:
    """Energy of x under the landscape's own kernel"""
    if spec.kernel is KernelId.GAUSSIAN:
        return lse_energy(x, patterns, spec)
    return lsr_energy(x, patterns, spec)


def lsr_gradient_state(x, patterns: PatternSet, spec: EnergySpec) -> GradientState:
    """
    Gradient of the compact-kernel energy with an explicit supportedness flag

    For Epanechnikov the numerator sum over B(x) of (x - xi_mu) is formed as
    |B| (x - centroid(B)), so the gradient at a centroid of its own active set
    is exactly zero.

    Returns:
        GradientState; in the unsupported region (eps = 0, empty B) the vector is zero and supported is False
    """
    _require_compact(spec, "lsr_gradient")
    x = _as_query(x, patterns)
    t = _scaled_sqdist(x, patterns, spec)
    mask = t < 1.0
    active = tuple(int(i) for i in np.flatnonzero(mask))
    total = spec.epsilon + float(np.sum(separation_profile(spec.kernel, t)))

    if not active:
        return GradientState(vector=np.zeros(patterns.d), supported=total > 0.0, active=active)

    if spec.kernel is KernelId.EPANECHNIKOV:
        numerator = len(active) * (x - patterns.centroid(active))
    else:
        coeff = -np.asarray(kernel_shape_derivative(spec.kernel, t[mask]))
        numerator = coeff.sum() * x - coeff @ patterns.data[mask]

    if total <= 0.0:
        # only reachable for the Uniform kernel's zero-slope interior
        return GradientState(vector=np.zeros(patterns.d), supported=False, active=active)
    return GradientState(vector=numerator / total, supported=True, active=active)


def lsr_gradient(x, patterns: PatternSet, spec: EnergySpec) -> np.ndarray:
    """Gradient vector of the LSR energy (zero in the unsupported region)"""
    return lsr_gradient_state(x, patterns, spec).vector


def lse_weights(x, patterns: PatternSet, spec: EnergySpec) -> np.ndarray:
    """Softmax weights p_mu(x) proportional to exp(-(beta/2) ||x - xi_mu||^2)"""
    x = _as_query(x, patterns)
    return softmax(-_scaled_sqdist(x, patterns, spec))


def lse_gradient(x, patterns: PatternSet, spec: EnergySpec) -> np.ndarray:
    """x minus the softmax-weighted mean of the patterns"""
    _require_gaussian(spec, "lse_gradient")
    x = _as_query(x, patterns)
    return x - lse_weights(x, patterns, spec) @ patterns.data


def gradient(x, patterns: PatternSet, spec: EnergySpec) -> np.ndarray:
    """Gradient of the energy under the landscape's own kernel"""
    if spec.kernel is KernelId.GAUSSIAN:
        return lse_gradient(x, patterns, spec)
    return lsr_gradient(x, patterns, spec)


def lsr_hessian_scalar(x, patterns: PatternSet, spec: EnergySpec) -> float:
    """
    Hessian of the Epanechnikov energy at a stationary point, as the scalar c in c * I

    Returns:
        |B(x)| / (eps + sum of active weights), positive at every supported stationary point
    """
    if spec.kernel is not KernelId.EPANECHNIKOV:
        raise InvalidParameterError(f"lsr_hessian_scalar is defined for epanechnikov only, got {spec.kernel}")
    x = _as_query(x, patterns)
    t = _scaled_sqdist(x, patterns, spec)
    mask = t < 1.0
    if not mask.any():
        raise InvalidParameterError("Hessian is undefined where the active set is empty")
    total = spec.epsilon + float(np.sum(separation_profile(spec.kernel, t)))
    return int(mask.sum()) / total


def _scaled_sqdist_batch(points: np.ndarray, patterns: PatternSet, spec: EnergySpec) -> np.ndarray:
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[1] != patterns.d:
        raise InvalidParameterError(f"Queries must have {patterns.d} columns, got {points.shape[1]}")
    return (spec.beta / 2) * cdist(points, patterns.data, metric="sqeuclidean")


def energy_batch(points: np.ndarray, patterns: PatternSet, spec: EnergySpec) -> np.ndarray:
    """Energies of N query points (rows of points)"""
    t = _scaled_sqdist_batch(points, patterns, spec)
    if spec.kernel is KernelId.GAUSSIAN:
        return -logsumexp(-t, axis=1) / spec.beta
    total = spec.epsilon + np.sum(separation_profile(spec.kernel, t), axis=1)
    with np.errstate(divide="ignore"):
        return np.where(total > 0.0, -np.log(np.where(total > 0.0, total, 1.0)) / spec.beta, np.inf)


def support_mask(points: np.ndarray, patterns: PatternSet, spec: EnergySpec) -> np.ndarray:
    """Which query points lie strictly inside at least one support ball (finite energy at eps = 0)"""
    t = _scaled_sqdist_batch(points, patterns, spec)
    if not spec.kernel.compact:
        return np.ones(t.shape[0], dtype=bool)
    return np.any(t < 1.0, axis=1)


def gradient_batch(points: np.ndarray, patterns: PatternSet, spec: EnergySpec) -> Tuple[np.ndarray, np.ndarray]:
    """
    Gradients of N query points at once

    Returns:
        (N x d gradients, N supported flags); unsupported rows carry zero gradients
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    t = _scaled_sqdist_batch(points, patterns, spec)
    if spec.kernel is KernelId.GAUSSIAN:
        probs = softmax(-t, axis=1)
        return points - probs @ patterns.data, np.ones(points.shape[0], dtype=bool)

    total = spec.epsilon + np.sum(separation_profile(spec.kernel, t), axis=1)
    coeff = -kernel_shape_derivative(spec.kernel, t)
    numerator = coeff.sum(axis=1)[:, None] * points - coeff @ patterns.data
    supported = total > 0.0
    safe = np.where(supported, total, 1.0)
    grads = np.where(supported[:, None], numerator / safe[:, None], 0.0)
    return grads, supported
