"""
Sampling - Support-boundary queries and Monte Carlo support volume
"""

import hashlib
import logging
import math
from typing import NamedTuple, Union

import numpy as np

from densam.memory.energy import EnergySpec, support_mask
from densam.memory.errors import InvalidParameterError
from densam.memory.patterns import PatternSet

logger = logging.getLogger(__name__)

SeedLike = Union[int, np.random.SeedSequence, np.random.Generator]
MC_BATCH = 100_000


class SupportEstimate(NamedTuple):
    fraction: float
    standard_error: float
    n_samples: int


def make_rng(seed: SeedLike) -> np.random.Generator:
    """PCG64 generator from an int, a SeedSequence, or an existing generator"""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def sample_support_boundary(xi, spec: EnergySpec, thickness: float, n: int, seed: SeedLike) -> np.ndarray:
    """
    Draw n points in the thin shell 2/beta - thickness <= ||x - xi||^2 < 2/beta

    Directions are uniform on the sphere and radii uniform in shell volume.
    Every point is checked against the exact inequalities (including the strict
    support test) and redrawn if rounding pushed it out.

    Args:
        xi: Shell center
        spec: Energy specification giving beta
        thickness: Shell thickness in squared distance, in (0, 2/beta)
        n: Number of points
        seed: Seed or generator

    Returns:
        n x d array
    """
    radius_sq = 2.0 / spec.beta
    if not 0.0 < thickness < radius_sq:
        raise InvalidParameterError(f"thickness must lie in (0, {radius_sq:.6g}), got {thickness}")
    if n < 0:
        raise InvalidParameterError(f"n must be >= 0, got {n}")

    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    d = xi.shape[0]
    rng = make_rng(seed)
    inner_sq = radius_sq - thickness
    lo, hi = inner_sq ** (d / 2), radius_sq ** (d / 2)

    points = np.empty((n, d))
    pending = np.arange(n)
    while pending.size:
        directions = rng.standard_normal((pending.size, d))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        radii = (lo + rng.random(pending.size) * (hi - lo)) ** (1.0 / d)
        candidates = xi + radii[:, None] * directions
        diff = candidates - xi
        sqd = np.einsum("ij,ij->i", diff, diff)
        valid = (sqd >= inner_sq) & ((spec.beta / 2) * sqd < 1.0)
        points[pending[valid]] = candidates[valid]
        pending = pending[~valid]
    return points


def boundary_queries(
    patterns: PatternSet, spec: EnergySpec, thickness: float, n_queries: int, seed: SeedLike
) -> np.ndarray:
    """
    Queries on the support boundaries of the stored patterns

    Query i sits on the shell around pattern i mod M.
    """
    rng = make_rng(seed)
    owners = np.arange(n_queries) % patterns.m
    queries = np.empty((n_queries, patterns.d))
    for mu in range(min(patterns.m, n_queries)):
        rows = np.flatnonzero(owners == mu)
        queries[rows] = sample_support_boundary(patterns.data[mu], spec, thickness, rows.size, rng)
    return queries


def queries_checksum(queries: np.ndarray) -> str:
    """SHA-256 of the query matrix bytes"""
    return hashlib.sha256(np.ascontiguousarray(queries, dtype=float).tobytes()).hexdigest()


def mc_standard_error(p: float, n: int) -> float:
    """Binomial standard error sqrt(p (1 - p) / n)"""
    if n < 1:
        raise InvalidParameterError(f"n must be >= 1, got {n}")
    return math.sqrt(max(p * (1.0 - p), 0.0) / n)


def support_fraction_estimate(
    patterns: PatternSet, spec: EnergySpec, n_samples: int, seed: SeedLike, batch: int = MC_BATCH
) -> SupportEstimate:
    """
    Fraction of [0, 1]^d where the energy is finite at eps = 0, with its standard error

    Args:
        patterns: Stored patterns
        spec: Energy specification (the Gaussian kernel is supported everywhere)
        n_samples: Uniform samples drawn (>= 1)
        seed: Seed or generator
        batch: Samples evaluated per vectorized block

    Returns:
        SupportEstimate
    """
    if n_samples < 1:
        raise InvalidParameterError(f"n_samples must be >= 1, got {n_samples}")
    rng = make_rng(seed)
    hits = 0
    remaining = n_samples
    while remaining:
        size = min(batch, remaining)
        hits += int(support_mask(rng.random((size, patterns.d)), patterns, spec).sum())
        remaining -= size

    fraction = hits / n_samples
    error = mc_standard_error(fraction, n_samples)
    logger.debug(f"Support fraction at beta={spec.beta:.6g}: {fraction:.4f} +/- {error:.4f} ({n_samples} samples)")
    return SupportEstimate(fraction=fraction, standard_error=error, n_samples=n_samples)


def support_fraction_mc(patterns: PatternSet, spec: EnergySpec, n_samples: int, seed: SeedLike) -> float:
    """Monte Carlo volume fraction of the unit hypercube with finite energy at eps = 0"""
    return support_fraction_estimate(patterns, spec, n_samples, seed).fraction
