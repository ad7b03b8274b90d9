"""
Retrieval - Gradient descent, exact single-step retrieval and the LSR centroid fixed-point map
"""

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial.distance import pdist, squareform

from densam.memory.energy import (
    EnergySpec,
    active_set,
    energy,
    gradient,
    gradient_batch,
    lsr_energy,
    lsr_gradient,
    support_mask,
)
from densam.memory.errors import (
    AmbiguousBasinError,
    CycleDetectedError,
    InvalidParameterError,
    NoConvergenceError,
    UnsupportedStartError,
)
from densam.memory.kernels import KernelId
from densam.memory.patterns import PatternSet

logger = logging.getLogger(__name__)

DEFAULT_DELTA = 1e-8
DEFAULT_MAX_ITER = 50
SINGLE_STEP_TOLERANCE = 1e-12


class LearningRateSchedule(ABC):
    """Step size alpha_t for t = 0, 1, ..."""

    @abstractmethod
    def rate(self, t: int) -> float:
        ...

    def __call__(self, t: int) -> float:
        return self.rate(t)


@dataclass(frozen=True)
class ConstantSchedule(LearningRateSchedule):
    alpha: float = 0.01

    def __post_init__(self):
        if not self.alpha > 0:
            raise InvalidParameterError(f"Learning rate must be positive, got {self.alpha}")

    def rate(self, t: int) -> float:
        return self.alpha


@dataclass(frozen=True)
class CosineSchedule(LearningRateSchedule):
    """alpha_t = end + (start - end)(1 + cos(pi t / steps)) / 2, held at end after the last step"""

    start: float = 0.01
    end: float = 0.0001
    steps: int = 13000

    def __post_init__(self):
        if not (self.start > 0 and self.end > 0):
            raise InvalidParameterError(f"Learning rates must be positive, got {self.start} -> {self.end}")
        if self.steps < 1:
            raise InvalidParameterError(f"steps must be >= 1, got {self.steps}")

    def rate(self, t: int) -> float:
        progress = min(t, self.steps) / self.steps
        return self.end + 0.5 * (self.start - self.end) * (1.0 + math.cos(math.pi * progress))


@dataclass
class RetrievalResult:
    """Outcome of a descent run"""

    point: np.ndarray
    steps: int
    converged: bool
    trajectory_energy: Optional[List[float]] = None
    energy_increases: int = 0


@dataclass
class FixedPointResult:
    """Outcome of the centroid fixed-point iteration"""

    point: np.ndarray
    subset: Tuple[int, ...]
    iterations: int
    cycle_detected: bool = False
    energies: List[float] = field(default_factory=list)


def _require_supported_start(x0: np.ndarray, patterns: PatternSet, spec: EnergySpec) -> None:
    if spec.kernel.compact and spec.epsilon == 0.0 and len(active_set(x0, patterns, spec)) == 0:
        raise UnsupportedStartError(f"Start point lies outside every support ball (beta={spec.beta})")


def gradient_descent(
    x0,
    patterns: PatternSet,
    spec: EnergySpec,
    steps: int,
    lr_schedule: LearningRateSchedule,
    delta: float = DEFAULT_DELTA,
    record: bool = False,
) -> RetrievalResult:
    """
    Plain gradient descent x_t = x_{t-1} - alpha_t grad E(x_{t-1})

    Args:
        x0: Start point
        patterns: Stored patterns
        spec: Energy specification (any kernel)
        steps: Maximum number of updates (>= 1)
        lr_schedule: Step-size schedule
        delta: Convergence threshold on the gradient norm
        record: Keep the energy at every iterate

    Returns:
        RetrievalResult with the last iterate; energy increases are counted, not prevented

    Raises:
        UnsupportedStartError: If x0 has an empty active set under a compact kernel with eps = 0
    """
    if steps < 1:
        raise InvalidParameterError(f"steps must be >= 1, got {steps}")
    x = np.array(x0, dtype=float).reshape(patterns.d)
    _require_supported_start(x, patterns, spec)

    trajectory = [energy(x, patterns, spec)] if record else None
    previous = energy(x, patterns, spec)
    increases = 0
    converged = False
    taken = 0

    for t in range(steps):
        g = gradient(x, patterns, spec)
        if np.linalg.norm(g) < delta:
            converged = True
            break
        candidate = x - lr_schedule(t) * g
        if spec.kernel.compact and spec.epsilon == 0.0 and len(active_set(candidate, patterns, spec)) == 0:
            logger.debug(f"Descent step {t} would leave the support, stopping at the last supported iterate")
            break
        x = candidate
        taken += 1
        current = energy(x, patterns, spec)
        if current > previous:
            increases += 1
        previous = current
        if record:
            trajectory.append(current)

    if not converged:
        converged = bool(np.linalg.norm(gradient(x, patterns, spec)) < delta)
    if increases:
        logger.debug(f"Energy increased on {increases} of {taken} descent steps")
    return RetrievalResult(
        point=x, steps=taken, converged=converged, trajectory_energy=trajectory, energy_increases=increases
    )


def gradient_descent_batch(
    starts: np.ndarray,
    patterns: PatternSet,
    spec: EnergySpec,
    steps: int,
    lr_schedule: LearningRateSchedule,
    delta: float = DEFAULT_DELTA,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Run gradient descent on N queries at once

    Queries stop moving once their gradient norm drops below delta. Under a
    compact kernel with eps = 0, a query whose next step would leave the
    support is frozen at its last supported iterate.

    Returns:
        (N x d final points, N converged flags, N step counts)
    """
    points = np.array(starts, dtype=float, ndmin=2)
    n = points.shape[0]
    converged = np.zeros(n, dtype=bool)
    live = np.ones(n, dtype=bool)
    taken = np.zeros(n, dtype=int)
    guard_support = spec.kernel.compact and spec.epsilon == 0.0

    if guard_support:
        unsupported = ~support_mask(points, patterns, spec)
        if unsupported.any():
            raise UnsupportedStartError(f"{int(unsupported.sum())} start points lie outside every support ball")

    for t in range(steps):
        idx = np.flatnonzero(live)
        if idx.size == 0:
            break
        grads, _ = gradient_batch(points[idx], patterns, spec)
        small = np.linalg.norm(grads, axis=1) < delta
        converged[idx[small]] = True
        live[idx[small]] = False

        moving = idx[~small]
        if moving.size == 0:
            break
        candidates = points[moving] - lr_schedule(t) * grads[~small]
        if guard_support:
            inside = support_mask(candidates, patterns, spec)
            live[moving[~inside]] = False
            moving, candidates = moving[inside], candidates[inside]
        points[moving] = candidates
        taken[moving] += 1

    still = np.flatnonzero(live)
    if still.size:
        grads, _ = gradient_batch(points[still], patterns, spec)
        converged[still] = np.linalg.norm(grads, axis=1) < delta
    logger.debug(f"Batch descent: {int(converged.sum())}/{n} queries converged within {steps} steps")
    return points, converged, taken


def single_step_retrieve(x0, patterns: PatternSet, spec: EnergySpec, verify: bool = False) -> np.ndarray:
    """
    Exact one-step retrieval from inside a single LSR basin

    With eta = eps + relu(1 - (beta/2) ||x0 - xi||^2) the update x0 - eta grad E(x0)
    simplifies to xi exactly, so the stored pattern is returned directly once
    the precondition is checked.

    Args:
        x0: Query whose active set must be a single pattern
        patterns: Stored patterns
        spec: Epanechnikov energy specification
        verify: Also evaluate the floating-point update and compare it within 1e-12

    Raises:
        AmbiguousBasinError: If the active set of x0 is not a singleton
    """
    if spec.kernel is not KernelId.EPANECHNIKOV:
        raise InvalidParameterError(f"single_step_retrieve needs the epanechnikov kernel, got {spec.kernel}")
    x0 = np.array(x0, dtype=float).reshape(patterns.d)
    active = active_set(x0, patterns, spec)
    if len(active) != 1:
        raise AmbiguousBasinError(
            f"Query activates {len(active)} patterns, exact retrieval needs exactly one", active=active.indices
        )
    mu = active.indices[0]
    target = patterns.data[mu].copy()

    if verify:
        sqd = float(patterns.squared_distances(x0)[mu])
        eta = spec.epsilon + max(0.0, 1.0 - (spec.beta / 2) * sqd)
        update = x0 - eta * lsr_gradient(x0, patterns, spec)
        scale = max(1.0, float(np.max(np.abs(target))))
        error = float(np.max(np.abs(update - target)))
        if error > SINGLE_STEP_TOLERANCE * scale:
            logger.warning(f"Floating-point single step differs from pattern {mu} by {error:.3e}")
    return target


def fixed_point_iteration(
    z0,
    patterns: PatternSet,
    spec: EnergySpec,
    max_iter: int = DEFAULT_MAX_ITER,
    on_cycle: str = "resolve",
) -> FixedPointResult:
    """
    Iterate z <- centroid(B(z)) until the active set repeats

    Termination compares active sets, which is exact. A revisit of an earlier,
    non-fixed active set is a cycle: with on_cycle='resolve' the lowest-energy
    centroid on the cycle is returned, with on_cycle='raise' CycleDetectedError
    is raised.

    Args:
        z0: Start point with a non-empty active set
        patterns: Stored patterns
        spec: Epanechnikov energy specification
        max_iter: Iteration cap
        on_cycle: 'resolve' or 'raise'

    Returns:
        FixedPointResult whose point is the canonical centroid of its subset

    Raises:
        UnsupportedStartError: If B(z0) is empty
        CycleDetectedError: On a cycle with on_cycle='raise'
        NoConvergenceError: If max_iter is exhausted
    """
    if spec.kernel is not KernelId.EPANECHNIKOV:
        raise InvalidParameterError(f"fixed_point_iteration needs the epanechnikov kernel, got {spec.kernel}")
    if on_cycle not in ("resolve", "raise"):
        raise InvalidParameterError(f"on_cycle must be 'resolve' or 'raise', got '{on_cycle}'")

    z0 = np.array(z0, dtype=float).reshape(patterns.d)
    subset = active_set(z0, patterns, spec).indices
    if not subset:
        raise UnsupportedStartError("Start point has an empty active set")

    seen: Dict[Tuple[int, ...], int] = {subset: 0}
    history: List[Tuple[int, ...]] = [subset]
    energies: List[float] = []

    for iteration in range(1, max_iter + 1):
        z = patterns.centroid(subset)
        current = lsr_energy(z, patterns, spec)
        if energies and current > energies[-1]:
            logger.warning(f"Energy increased along the centroid iteration: {energies[-1]:.6g} -> {current:.6g}")
        energies.append(current)

        following = active_set(z, patterns, spec).indices
        if following == subset:
            return FixedPointResult(point=z, subset=subset, iterations=iteration, energies=energies)
        if not following:
            raise UnsupportedStartError(f"Centroid of {subset} left every support ball")

        if following in seen:
            cycle = history[seen[following]:]
            if on_cycle == "raise":
                raise CycleDetectedError(f"Active sets cycle through {cycle}")
            best = min(cycle, key=lambda s: lsr_energy(patterns.centroid(s), patterns, spec))
            logger.warning(f"Cycle of length {len(cycle)} detected, resolving to subset {best}")
            return FixedPointResult(
                point=patterns.centroid(best),
                subset=best,
                iterations=iteration,
                cycle_detected=True,
                energies=energies,
            )

        seen[following] = len(history)
        history.append(following)
        subset = following

    raise NoConvergenceError(f"No fixed point after {max_iter} iterations")


def lsr_fixed_point(z0, patterns: PatternSet, spec: EnergySpec) -> np.ndarray:
    """Exact LSR fixed point reached from z0 (a centroid of some pattern subset)"""
    return fixed_point_iteration(z0, patterns, spec).point


def dedup_memories(points: Sequence[np.ndarray], spec: EnergySpec) -> List[np.ndarray]:
    """
    Collapse retrieved points that stand for the same memory

    Under the Gaussian kernel, points within 2/sqrt(beta) of each other are
    merged through the connected components of the threshold graph. Compact
    kernels return canonical centroids, so only bitwise-equal points merge.
    The first point of each group is kept, in input order.
    """
    points = [np.asarray(p, dtype=float) for p in points]
    if len(points) <= 1:
        return points

    if spec.kernel is KernelId.GAUSSIAN:
        threshold = 2.0 / math.sqrt(spec.beta)
        adjacency = csr_matrix(squareform(pdist(np.vstack(points))) <= threshold)
        _, labels = connected_components(adjacency, directed=False)
        _, first = np.unique(labels, return_index=True)
        return [points[i] for i in sorted(first)]

    unique: Dict[bytes, np.ndarray] = {}
    for p in points:
        unique.setdefault(np.ascontiguousarray(p).tobytes(), p)
    return list(unique.values())
