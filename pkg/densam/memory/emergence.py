"""
Emergence - Enumerate and classify every memory of an LSR landscape

Memories of the Epanechnikov energy are centroids of pattern subsets K whose
own active set is exactly K. Two enumerators find them: an exhaustive one over
all 2^M subsets (the oracle) and a neighborhood-pruned one that only visits
subsets of patterns close enough to interact.
"""

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterator, List, NamedTuple, Optional, Sequence, Set, Tuple

import numpy as np
from scipy.spatial.distance import cdist

from densam.memory.energy import (
    EnergySpec,
    gradient,
    lsr_energy,
    lsr_gradient_state,
    lsr_hessian_scalar,
)
from densam.memory.errors import (
    InvalidParameterError,
    NeighborhoodBlowupError,
    TooManyPatternsError,
)
from densam.memory.kernels import KernelId
from densam.memory.patterns import PatternSet, generate_grid

logger = logging.getLogger(__name__)

DEFAULT_DELTA = 1e-10
DEFAULT_ENUMERATION_CAP = 20
DEFAULT_SUBSET_CAP = 1 << 22
CHUNK_SIZE = 1 << 14
# candidate prefilter tolerance on t = (beta/2) d^2; survivors are re-checked exactly
PREFILTER_SLACK = 1e-9

SubsetKey = Tuple[int, ...]


class MemoryKind(str, Enum):
    STORED = "stored"
    NOVEL = "novel"


class LocalClass(str, Enum):
    NOT_EMERGENT = "not-emergent"
    LOCALLY_EMERGENT = "locally-emergent"
    STRONGLY_EMERGENT = "strongly-emergent"


class BasinMargins(NamedTuple):
    delta_min: float
    gamma_min: float
    d_max: float


class GridCount(NamedTuple):
    observed: int
    lam: int  # patterns interacting at the largest novel memory


@dataclass
class MemoryRecord:
    """One local minimum of the LSR energy and its generating subset"""

    point: np.ndarray
    subset: SubsetKey
    energy: float
    kind: MemoryKind
    local_class: LocalClass = LocalClass.NOT_EMERGENT
    basin_radius: float = 0.0
    margins: Optional[BasinMargins] = None
    hessian_scalar: float = math.nan
    minimal_verified: bool = False
    tentative: bool = False

    @property
    def key(self) -> SubsetKey:
        return self.subset

    def to_dict(self) -> dict:
        margins = self.margins._asdict() if self.margins is not None else None
        return {
            "point": [float(v) for v in self.point],
            "subset": list(self.subset),
            "energy": float(self.energy),
            "kind": self.kind.value,
            "local_class": self.local_class.value,
            "basin_radius": float(self.basin_radius),
            "margins": margins,
            "hessian_scalar": float(self.hessian_scalar),
            "minimal_verified": self.minimal_verified,
            "tentative": self.tentative,
        }


@dataclass
class EmergenceReport:
    """All memories of a landscape plus the global emergence verdict"""

    memories: List[MemoryRecord]
    stored_recovered: int
    novel_count: int
    globally_emergent: bool
    epsilon_star: float
    stored_flags: List[bool] = field(default_factory=list)

    @property
    def novel(self) -> List[MemoryRecord]:
        return [m for m in self.memories if m.kind is MemoryKind.NOVEL]

    @property
    def stored(self) -> List[MemoryRecord]:
        return [m for m in self.memories if m.kind is MemoryKind.STORED]


def _require_epanechnikov(spec: EnergySpec, operation: str) -> None:
    if spec.kernel is not KernelId.EPANECHNIKOV:
        raise InvalidParameterError(f"{operation} enumerates epanechnikov landscapes only, got {spec.kernel}")


def basin_margins(
    point: np.ndarray, subset: Sequence[int], patterns: PatternSet, spec: EnergySpec, literal: bool = True
) -> BasinMargins:
    """
    Margins that bound the exact basin around a memory

    Args:
        point: The memory
        subset: Its active set B
        patterns: Stored patterns
        spec: Energy specification
        literal: Take D_max over all patterns (True) or over B only (False)

    Returns:
        BasinMargins; gamma_min is +inf when B covers every pattern
    """
    sqd = patterns.squared_distances(point)
    radius_sq = 2.0 / spec.beta
    inside = np.zeros(patterns.m, dtype=bool)
    inside[list(subset)] = True
    if not inside.any():
        raise InvalidParameterError("Basin margins need a non-empty active set")

    delta_min = float(np.min(radius_sq - sqd[inside]))
    gamma_min = float(np.min(sqd[~inside] - radius_sq)) if (~inside).any() else math.inf
    d_max = float(np.sqrt(np.max(sqd if literal else sqd[inside])))
    return BasinMargins(delta_min=delta_min, gamma_min=gamma_min, d_max=d_max)


def radius_from_margins(margins: BasinMargins) -> float:
    """r* = sqrt(D_max^2 + min(delta_min, gamma_min)) - D_max"""
    slack = min(margins.delta_min, margins.gamma_min)
    return math.sqrt(margins.d_max**2 + slack) - margins.d_max


def basin_radius(record: MemoryRecord, patterns: PatternSet, spec: EnergySpec, literal: bool = True) -> float:
    """
    Radius r* within which every query shares the memory's active set

    With literal=True, D_max runs over all patterns and the radius is valid for
    inactive patterns as well. With literal=False it runs over the active set
    only, which can overshoot when an inactive pattern sits just outside.
    """
    return radius_from_margins(basin_margins(record.point, record.subset, patterns, spec, literal=literal))


def _accept(subset: SubsetKey, patterns: PatternSet, spec: EnergySpec, delta: float) -> Optional[MemoryRecord]:
    """Exact acceptance: supported, stationary and self-consistent centroid"""
    point = patterns.centroid(subset)
    state = lsr_gradient_state(point, patterns, spec)
    if not state.active or state.active != subset:
        return None
    if not np.linalg.norm(state.vector) < delta:
        return None

    margins = basin_margins(point, subset, patterns, spec)
    return MemoryRecord(
        point=point,
        subset=subset,
        energy=lsr_energy(point, patterns, spec),
        kind=MemoryKind.STORED if len(subset) == 1 else MemoryKind.NOVEL,
        basin_radius=radius_from_margins(margins),
        margins=margins,
        hessian_scalar=lsr_hessian_scalar(point, patterns, spec),
    )


def _bit_masks(start: int, stop: int, width: int) -> np.ndarray:
    codes = np.arange(start, stop, dtype=np.int64)
    return ((codes[:, None] >> np.arange(width, dtype=np.int64)) & 1).astype(bool)


def _candidate_subsets(
    columns: np.ndarray, patterns: PatternSet, spec: EnergySpec, anchor: Optional[int] = None
) -> Iterator[SubsetKey]:
    """
    Subsets of columns (plus anchor, if given) whose centroid plausibly has them as active set

    Centroids are formed in bulk with a matrix product, which may differ from the
    canonical centroid in the last bits, so the active-set comparison uses a
    small slack and every survivor is re-checked by _accept.
    """
    width = len(columns)
    data = patterns.data
    block = data[columns]
    t_scale = spec.beta / 2
    first = 0 if anchor is not None else 1

    for start in range(first, 1 << width, CHUNK_SIZE):
        stop = min(start + CHUNK_SIZE, 1 << width)
        local = _bit_masks(start, stop, width)
        sums = local.astype(float) @ block
        counts = local.sum(axis=1)
        member = np.zeros((local.shape[0], patterns.m), dtype=bool)
        member[:, columns] = local
        if anchor is not None:
            sums = sums + data[anchor]
            counts = counts + 1
            member[:, anchor] = True

        t = t_scale * cdist(sums / counts[:, None], data, metric="sqeuclidean")
        plausible = np.all(np.where(member, t < 1.0 + PREFILTER_SLACK, t >= 1.0 - PREFILTER_SLACK), axis=1)
        for row in np.flatnonzero(plausible):
            yield tuple(int(i) for i in np.flatnonzero(member[row]))


def _sorted_records(found: Dict[SubsetKey, MemoryRecord]) -> List[MemoryRecord]:
    return [found[k] for k in sorted(found, key=lambda s: (len(s), s))]


def brute_force_minima(
    patterns: PatternSet, spec: EnergySpec, delta: float = DEFAULT_DELTA, cap: int = DEFAULT_ENUMERATION_CAP
) -> List[MemoryRecord]:
    """
    Test the centroid of every non-empty subset of the patterns

    Every subset goes straight to the exact acceptance check. There is no bulk
    prefilter here, unlike discover_minima.

    Args:
        patterns: Stored patterns (M <= cap)
        spec: Epanechnikov energy specification
        delta: Stationarity threshold on the gradient norm
        cap: Largest M accepted

    Returns:
        Accepted memories sorted by (subset size, subset)

    Raises:
        TooManyPatternsError: If M exceeds cap
    """
    _require_epanechnikov(spec, "brute_force_minima")
    if patterns.m > cap:
        raise TooManyPatternsError(f"Exhaustive enumeration of {patterns.m} patterns exceeds cap {cap}")

    found: Dict[SubsetKey, MemoryRecord] = {}
    for size in range(1, patterns.m + 1):
        for subset in itertools.combinations(range(patterns.m), size):
            record = _accept(subset, patterns, spec, delta)
            if record is not None:
                found[subset] = record
    logger.debug(f"Exhaustive enumeration over 2^{patterns.m} subsets accepted {len(found)} memories")
    return _sorted_records(found)


def interaction_neighborhoods(patterns: PatternSet, radius: float) -> List[np.ndarray]:
    """For each pattern, the indices within 2 * radius of it (itself included)"""
    d_matrix = patterns.geometry.d_matrix if patterns.m > 1 else np.zeros((1, 1))
    return [np.flatnonzero(row <= 2 * radius) for row in d_matrix]


def discover_minima(
    patterns: PatternSet,
    spec: EnergySpec,
    delta: float = DEFAULT_DELTA,
    subset_cap: int = DEFAULT_SUBSET_CAP,
    workers: int = 1,
) -> List[MemoryRecord]:
    """
    Neighborhood-pruned search for all memories

    Patterns of an accepted subset all lie within the support radius of its
    centroid, so they pairwise interact. Each subset is therefore reached from
    its smallest index mu by enumerating subsets of mu's higher-indexed
    neighbors, and appears exactly once across anchors.

    Args:
        patterns: Stored patterns
        spec: Epanechnikov energy specification
        delta: Stationarity threshold on the gradient norm
        subset_cap: Largest number of subsets enumerated for a single anchor
        workers: Anchors processed in parallel

    Returns:
        Accepted memories sorted by (subset size, subset); equal to brute_force_minima

    Raises:
        NeighborhoodBlowupError: If an anchor would need more than subset_cap subsets
    """
    _require_epanechnikov(spec, "discover_minima")
    neighborhoods = interaction_neighborhoods(patterns, spec.radius)
    plans = []
    for mu, hood in enumerate(neighborhoods):
        higher = hood[hood > mu]
        subsets = 1 << len(higher)
        if subsets > subset_cap:
            raise NeighborhoodBlowupError(
                f"Pattern {mu} has {len(higher)} higher-indexed neighbors ({subsets} subsets > cap {subset_cap})",
                anchor=mu,
                subsets=subsets,
            )
        plans.append((mu, higher))

    def search(plan) -> Dict[SubsetKey, MemoryRecord]:
        mu, higher = plan
        local: Dict[SubsetKey, MemoryRecord] = {}
        for subset in _candidate_subsets(higher, patterns, spec, anchor=mu):
            record = _accept(subset, patterns, spec, delta)
            if record is not None:
                local[subset] = record
        return local

    found: Dict[SubsetKey, MemoryRecord] = {}
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            for local in executor.map(search, plans):
                found.update(local)
    else:
        for plan in plans:
            found.update(search(plan))

    visited = sum(1 << len(h) for _, h in plans)
    logger.debug(f"Pruned enumeration visited {visited} subsets and accepted {len(found)} memories")
    return _sorted_records(found)


def compare_memory_sets(
    first: Sequence[MemoryRecord], second: Sequence[MemoryRecord]
) -> Tuple[List[SubsetKey], List[SubsetKey]]:
    """Subset keys found by only one of two enumerations"""
    a: Set[SubsetKey] = {m.key for m in first}
    b: Set[SubsetKey] = {m.key for m in second}
    return sorted(a - b), sorted(b - a)


def mean_interactions(patterns: PatternSet, radius: float) -> float:
    """Average number of patterns within 2 * radius of each pattern, itself included"""
    return float(np.mean([len(h) for h in interaction_neighborhoods(patterns, radius)]))


def beta_search(patterns: PatternSet, target_k: float, n_max: int = 50) -> float:
    """
    Binary search for the beta that gives target_k interacting patterns on average

    The basin radius r is bisected over [0.5 min D, 4 max D]. When no midpoint
    hits target_k exactly, the lower bracket end is used, so the result never
    has more interactions than requested unless the bracket floor itself does.
    At the floor 2r equals min D, the closest pair still counts, and the
    support balls just touch.

    Args:
        patterns: Stored patterns (M >= 2)
        target_k: Desired mean interaction count in [1, M]
        n_max: Maximum bisection steps

    Returns:
        beta = 2 / r^2
    """
    if target_k < 1 or target_k > patterns.m:
        raise InvalidParameterError(f"target_k must lie in [1, {patterns.m}], got {target_k}")
    if n_max < 1:
        raise InvalidParameterError(f"n_max must be >= 1, got {n_max}")

    summary = patterns.geometry
    low, high = 0.5 * summary.r_min, 4.0 * float(summary.d_matrix.max())
    for iteration in range(n_max):
        mid = 0.5 * (low + high)
        k = mean_interactions(patterns, mid)
        if k == target_k:
            logger.info(f"beta search hit K'={k:.4g} after {iteration + 1} steps (r={mid:.6g})")
            return 2.0 / mid**2
        if k < target_k:
            low = mid
        else:
            high = mid
    logger.info(f"beta search stopped after {n_max} steps at r={low:.6g}")
    return 2.0 / low**2


def stored_stationarity(patterns: PatternSet, spec: EnergySpec, delta: float = DEFAULT_DELTA) -> np.ndarray:
    """
    Which stored patterns are stationary points of the energy

    For Epanechnikov a stationary pattern must also have a positive Hessian
    scalar, which holds whenever its active set is non-empty.
    """
    flags = np.zeros(patterns.m, dtype=bool)
    for mu in range(patterns.m):
        xi = patterns.data[mu]
        stationary = bool(np.linalg.norm(gradient(xi, patterns, spec)) < delta)
        if stationary and spec.kernel is KernelId.EPANECHNIKOV:
            stationary = lsr_hessian_scalar(xi, patterns, spec) > 0
        flags[mu] = stationary
    return flags


def _fails_without(point: np.ndarray, mu: int, patterns: PatternSet, spec: EnergySpec, delta: float) -> bool:
    if patterns.m == 1:
        return True
    state = lsr_gradient_state(point, patterns.without(mu), spec)
    return not state.active or not np.linalg.norm(state.vector) < delta


def classify_emergence(
    patterns: PatternSet,
    spec: EnergySpec,
    delta: float = DEFAULT_DELTA,
    subset_cap: int = DEFAULT_SUBSET_CAP,
    workers: int = 1,
) -> EmergenceReport:
    """
    Classify every memory as stored or novel and decide global emergence

    A novel memory is strongly emergent when every pattern of its generating
    set is itself a recovered stored memory, locally emergent when at least one
    is. The generating set is cross-checked as minimal by removing each member
    in turn. Under the Gaussian kernel no stored pattern is an exact stationary
    point in general; only stored stationarity is reported.

    Returns:
        EmergenceReport
    """
    flags = stored_stationarity(patterns, spec, delta)
    if spec.kernel is KernelId.GAUSSIAN:
        recovered = int(flags.sum())
        logger.info(f"LSE landscape: {recovered}/{patterns.m} stored patterns are stationary")
        return EmergenceReport(
            memories=[],
            stored_recovered=recovered,
            novel_count=0,
            globally_emergent=False,
            epsilon_star=math.inf,
            stored_flags=flags.tolist(),
        )

    memories = discover_minima(patterns, spec, delta=delta, subset_cap=subset_cap, workers=workers)
    stored_ids = {m.subset[0] for m in memories if m.kind is MemoryKind.STORED}

    for record in memories:
        record.minimal_verified = all(_fails_without(record.point, mu, patterns, spec, delta) for mu in record.subset)
        if record.kind is MemoryKind.STORED:
            continue
        hits = sum(1 for mu in record.subset if mu in stored_ids)
        if hits == len(record.subset):
            record.local_class = LocalClass.STRONGLY_EMERGENT
        elif hits:
            record.local_class = LocalClass.LOCALLY_EMERGENT

    novel = [m for m in memories if m.kind is MemoryKind.NOVEL]
    epsilon_star = min((math.sqrt(float(patterns.squared_distances(m.point).min())) for m in novel), default=math.inf)
    report = EmergenceReport(
        memories=memories,
        stored_recovered=len(stored_ids),
        novel_count=len(novel),
        globally_emergent=len(stored_ids) == patterns.m and len(novel) >= 1,
        epsilon_star=epsilon_star,
        stored_flags=flags.tolist(),
    )
    logger.info(
        f"beta={spec.beta:.6g}: {report.stored_recovered}/{patterns.m} stored, "
        f"{report.novel_count} novel, globally emergent={report.globally_emergent}"
    )
    return report


def verify_global_emergence(
    report: EmergenceReport, patterns: PatternSet, spec: EnergySpec, delta: float = DEFAULT_DELTA
) -> bool:
    """Re-derive the global emergence verdict from the stored patterns and the novel memories directly"""
    if not stored_stationarity(patterns, spec, delta).all():
        return False
    novel_ok = [
        np.linalg.norm(gradient(m.point, patterns, spec)) < delta and lsr_hessian_scalar(m.point, patterns, spec) > 0
        for m in report.novel
    ]
    return len(novel_ok) >= 1 and all(novel_ok)


def grid_count_check(
    points_per_dim: int,
    d: int,
    beta: float,
    placement: str = "center",
    subset_cap: int = DEFAULT_SUBSET_CAP,
) -> GridCount:
    """
    Count novel memories of a regular grid

    lam is the size of the largest subset generating a novel memory. That is the
    number of patterns interacting at the memory, the per-memory interaction count
    the grid bound is stated in. It is 1 when no memory is novel.

    Returns:
        GridCount(observed novel memories, lam)
    """
    patterns = generate_grid(points_per_dim, d, placement=placement)
    memories = discover_minima(patterns, EnergySpec(kernel=KernelId.EPANECHNIKOV, beta=beta), subset_cap=subset_cap)
    novel = [m for m in memories if m.kind is MemoryKind.NOVEL]
    lam = max((len(m.subset) for m in novel), default=1)
    return GridCount(observed=len(novel), lam=lam)
