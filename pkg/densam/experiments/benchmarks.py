"""
Benchmarks - Minima scaling, generative log-likelihood and the per-kernel emergence sweep

Each experiment is a grid of independent (seed, beta) cells. Cells draw their
randomness from SeedSequence([seed, ladder_index, purpose]) so results do not
depend on the order in which a worker pool finishes them.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import minimize_scalar
from scipy.spatial.distance import cdist

from densam.common.schemas import ExperimentConfig, KernelSweepRow, LadderSpec, MetricsRow
from densam.experiments.mixtures import GaussianMixture
from densam.experiments.sampling import boundary_queries, make_rng, queries_checksum, support_fraction_estimate
from densam.memory.emergence import MemoryKind, discover_minima
from densam.memory.energy import EnergySpec, energy, energy_batch, support_mask
from densam.memory.errors import DenseAMError, InvalidParameterError
from densam.memory.kernels import KernelId, parse_kernel
from densam.memory.patterns import PatternSet, critical_beta_range, disjoint_beta, patterns_from_stanza
from densam.memory.retrieval import (
    ConstantSchedule,
    CosineSchedule,
    LearningRateSchedule,
    dedup_memories,
    fixed_point_iteration,
    gradient_descent_batch,
)

logger = logging.getLogger(__name__)

# SeedSequence purpose tags
STREAM_PATTERNS = 0
STREAM_QUERIES = 1
STREAM_MC = 2

STATIONARY_OFFSET = 1e-6
FLAT_TOLERANCE = 1e-9
FLAT_STEP_TOLERANCE = 1e-12
FLAT_MIN_LENGTH = 0.01
KERNEL_SWEEP_R_HIGH = 1.5
KERNEL_SWEEP_R_LOW = 0.45
KERNEL_SWEEP_DEFAULT_COUNT = 50

METRIC_COLUMNS = [
    "avg_loglik_lsr",
    "avg_loglik_lse",
    "unique_lsr",
    "unique_lse",
    "stored_recovered_lsr",
    "stored_recovered_lse",
    "novel_count",
    "support_fraction",
]

CellJob = Tuple[int, int, float, Callable[[], MetricsRow]]


def cell_rng(seed: int, index: int, purpose: int) -> np.random.Generator:
    return make_rng(np.random.SeedSequence([seed, index, purpose]))


def beta_ladder(patterns: PatternSet, ladder: LadderSpec) -> np.ndarray:
    """
    Inverse temperatures of a sweep

    Defaults span 2/d up to 2/r_min^2 (top='critical') or 8/r_min^2 (top='disjoint').
    """
    low_default, critical_high = critical_beta_range(patterns)
    low = ladder.low if ladder.low is not None else low_default
    if ladder.high is not None:
        high = ladder.high
    else:
        high = critical_high if ladder.top == "critical" else disjoint_beta(patterns)
    if low > high:
        raise InvalidParameterError(f"Ladder low {low:.6g} exceeds high {high:.6g}")
    if ladder.count == 0:
        return np.empty(0)
    if ladder.spacing == "geometric":
        return np.geomspace(low, high, ladder.count)
    return np.linspace(low, high, ladder.count)


def schedule_from(spec) -> LearningRateSchedule:
    if spec.schedule == "constant":
        return ConstantSchedule(spec.lr_start)
    return CosineSchedule(start=spec.lr_start, end=spec.lr_end, steps=spec.steps)


def mixture_for_seed(config: ExperimentConfig, seed: int) -> GaussianMixture:
    mix_seed = config.mixture.seed if config.mixture.seed is not None else seed
    return GaussianMixture.random(config.mixture.k, config.generator.d, sigma=config.mixture.sigma, seed=mix_seed)


def build_instance(
    config: ExperimentConfig, seed: int, mix: Optional[GaussianMixture] = None, base_dir=None
) -> Tuple[PatternSet, Optional[GaussianMixture]]:
    """
    Stored patterns of one seed (and the mixture they came from, if any)

    Raises:
        InvalidParameterError: If the generator cannot produce a pattern set
    """
    stanza = config.generator
    if stanza.kind == "mixture" or mix is not None:
        mix = mix if mix is not None else mixture_for_seed(config, seed)
        pattern_seed = stanza.seed if stanza.seed is not None else seed
        data = mix.sample(stanza.m, cell_rng(pattern_seed, 0, STREAM_PATTERNS))
        return PatternSet(data), mix
    if stanza.kind == "uniform" and stanza.seed is None:
        stanza = stanza.model_copy(update={"seed": seed})
    return patterns_from_stanza(stanza, base_dir=base_dir), None


def _error_row(config: ExperimentConfig, seed: int, index: int, beta: float, error: Exception) -> MetricsRow:
    return MetricsRow(
        experiment=config.experiment, seed=seed, ladder_index=index, beta=beta, status="error", error=str(error)
    )


def run_cells(config: ExperimentConfig, jobs: Sequence[CellJob], workers: int = 1) -> List[MetricsRow]:
    """
    Execute sweep cells, in parallel when workers > 1

    A failing cell becomes an error row; the other cells carry on.

    Returns:
        Rows sorted by (seed, ladder_index)
    """
    rows: List[MetricsRow] = []

    def guarded(job: CellJob) -> MetricsRow:
        seed, index, beta, fn = job
        try:
            return fn()
        except (DenseAMError, ValueError, ArithmeticError) as e:
            logger.warning(f"Cell seed={seed} index={index} beta={beta:.6g} failed: {e}")
            return _error_row(config, seed, index, beta, e)

    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            futures = [executor.submit(guarded, job) for job in jobs]
            for future in as_completed(futures):
                rows.append(future.result())
    else:
        rows = [guarded(job) for job in jobs]

    rows.sort(key=lambda r: (r.seed, r.ladder_index))
    return rows


def minima_scaling_cell(
    config: ExperimentConfig, patterns: PatternSet, seed: int, index: int, beta: float
) -> MetricsRow:
    """Memory counts and support fraction of one landscape"""
    spec = EnergySpec(kernel=config.kernel, beta=beta, epsilon=config.epsilon)
    logger.info(f"[seed {seed}] minima scaling cell {index}: beta={beta:.6g}")
    memories = discover_minima(patterns, spec, delta=config.delta, subset_cap=config.subset_cap)
    stored = sum(1 for m in memories if m.kind is MemoryKind.STORED)
    novel = len(memories) - stored
    support = support_fraction_estimate(patterns, spec, config.mc_samples, cell_rng(seed, index, STREAM_MC))
    return MetricsRow(
        experiment=config.experiment,
        seed=seed,
        ladder_index=index,
        beta=beta,
        stored_recovered_lsr=stored,
        novel_count=novel,
        support_fraction=support.fraction,
        support_fraction_se=support.standard_error,
    )


def run_minima_scaling(config: ExperimentConfig, workers: int = 1, base_dir=None) -> List[MetricsRow]:
    """
    Count stored and novel memories across the beta ladder for every seed

    Returns:
        One MetricsRow per (seed, beta), in seed then beta order
    """
    if parse_kernel(config.kernel) is not KernelId.EPANECHNIKOV:
        raise InvalidParameterError("Minima scaling enumerates epanechnikov landscapes only")
    jobs: List[CellJob] = []
    for seed in config.seeds:
        patterns, _ = build_instance(config, seed, base_dir=base_dir)
        for index, beta in enumerate(beta_ladder(patterns, config.ladder)):
            beta = float(beta)
            jobs.append(
                (seed, index, beta, lambda p=patterns, s=seed, i=index, b=beta: minima_scaling_cell(config, p, s, i, b))
            )
    logger.info(f"Minima scaling: {len(jobs)} cells over {len(config.seeds)} seeds")
    return run_cells(config, jobs, workers)


def retrieve_lse(queries: np.ndarray, patterns: PatternSet, beta: float, config: ExperimentConfig) -> List[np.ndarray]:
    """Descend the LSE energy from every query and merge memories closer than 2/sqrt(beta)"""
    spec = EnergySpec(kernel=KernelId.GAUSSIAN, beta=beta)
    descent = config.lse_descent
    points, converged, _ = gradient_descent_batch(queries, patterns, spec, descent.steps, schedule_from(descent), descent.delta)
    if not converged.all():
        logger.debug(f"LSE: {int((~converged).sum())} queries did not reach |grad| < {descent.delta}")
    return dedup_memories(list(points), spec)


def retrieve_lsr(
    queries: np.ndarray, patterns: PatternSet, beta: float, config: ExperimentConfig
) -> Tuple[List[np.ndarray], int]:
    """
    Warm-start descent on the LSR energy followed by the exact centroid iteration

    Returns:
        (unique memories, number of stored patterns among them)
    """
    spec = EnergySpec(kernel=KernelId.EPANECHNIKOV, beta=beta, epsilon=config.epsilon)
    descent = config.lsr_descent
    warm, _, _ = gradient_descent_batch(queries, patterns, spec, descent.steps, schedule_from(descent), descent.delta)

    found = {}
    failures = 0
    for start in warm:
        try:
            result = fixed_point_iteration(start, patterns, spec)
        except DenseAMError as e:
            failures += 1
            logger.debug(f"LSR fixed point failed: {e}")
            continue
        found.setdefault(result.subset, result.point)
    if failures:
        logger.warning(f"LSR: {failures}/{len(warm)} queries did not reach a fixed point")

    stored = sum(1 for subset in found if len(subset) == 1)
    return dedup_memories(list(found.values()), spec), stored


def lse_stored_recovered(memories: Sequence[np.ndarray], patterns: PatternSet, beta: float) -> int:
    """Patterns with some retrieved memory within the dedup radius 2/sqrt(beta)"""
    if not memories:
        return 0
    radius = 2.0 / math.sqrt(beta)
    distances = cdist(np.vstack(memories), patterns.data)
    return int(np.any(distances <= radius, axis=0).sum())


def loglik_cell(
    config: ExperimentConfig, patterns: PatternSet, mix: GaussianMixture, seed: int, index: int, beta: float
) -> MetricsRow:
    """Both energies retrieve from the same boundary queries; memories are scored under the mixture"""
    lsr_spec = EnergySpec(kernel=KernelId.EPANECHNIKOV, beta=beta, epsilon=config.epsilon)
    thickness = config.boundary_thickness * 2.0 / beta
    queries = boundary_queries(patterns, lsr_spec, thickness, config.n_queries, cell_rng(seed, index, STREAM_QUERIES))
    queries.setflags(write=False)
    checksum = queries_checksum(queries)
    logger.info(f"[seed {seed}] loglik cell {index}: beta={beta:.6g}, {len(queries)} queries ({checksum[:12]})")

    lse_memories = retrieve_lse(queries, patterns, beta, config)
    lsr_memories, lsr_stored = retrieve_lsr(queries, patterns, beta, config)
    if queries_checksum(queries) != checksum:
        raise RuntimeError("Queries changed between the two retrievals")

    support = support_fraction_estimate(patterns, lsr_spec, config.mc_samples, cell_rng(seed, index, STREAM_MC))
    return MetricsRow(
        experiment=config.experiment,
        seed=seed,
        ladder_index=index,
        beta=beta,
        avg_loglik_lsr=float(np.mean(mix.logpdf(np.vstack(lsr_memories)))) if lsr_memories else None,
        avg_loglik_lse=float(np.mean(mix.logpdf(np.vstack(lse_memories)))) if lse_memories else None,
        unique_lsr=len(lsr_memories),
        unique_lse=len(lse_memories),
        stored_recovered_lsr=lsr_stored,
        stored_recovered_lse=lse_stored_recovered(lse_memories, patterns, beta),
        support_fraction=support.fraction,
        support_fraction_se=support.standard_error,
        query_checksum=checksum,
    )


def run_loglik_benchmark(
    config: ExperimentConfig, mix: Optional[GaussianMixture] = None, workers: int = 1
) -> List[MetricsRow]:
    """
    Compare LSR and LSE memories as samples of a Gaussian-mixture ground truth

    Args:
        config: Experiment config (generator.m and generator.d size the pattern set)
        mix: Fixed ground truth; a fresh random mixture per seed when omitted
        workers: Cells executed in parallel

    Returns:
        One MetricsRow per (seed, beta)
    """
    jobs: List[CellJob] = []
    for seed in config.seeds:
        patterns, seed_mix = build_instance(config, seed, mix=mix if mix is not None else mixture_for_seed(config, seed))
        for index, beta in enumerate(beta_ladder(patterns, config.ladder)):
            beta = float(beta)
            jobs.append(
                (
                    seed,
                    index,
                    beta,
                    lambda p=patterns, g=seed_mix, s=seed, i=index, b=beta: loglik_cell(config, p, g, s, i, b),
                )
            )
    logger.info(f"Loglik benchmark: {len(jobs)} cells over {len(config.seeds)} seeds")
    return run_cells(config, jobs, workers)


def align_by_index(rows: Sequence[MetricsRow]) -> pd.DataFrame:
    """
    Average successful rows across seeds by ladder index

    Returns:
        DataFrame indexed by ladder_index with the mean beta, n_seeds, and
        per-metric means and standard errors (<metric>_se)
    """
    ok = [r.model_dump() for r in rows if r.status == "ok"]
    if not ok:
        return pd.DataFrame()
    frame = pd.DataFrame(ok)
    metrics = [c for c in METRIC_COLUMNS if frame[c].notna().any()]
    numeric = frame[["ladder_index", "beta"] + metrics].apply(pd.to_numeric, errors="coerce")
    grouped = numeric.groupby("ladder_index")
    summary = grouped.mean()
    summary["n_seeds"] = grouped.size()
    for column in metrics:
        summary[f"{column}_se"] = grouped[column].sem(ddof=1).fillna(0.0)
    return summary


def _flat_segments(grid: np.ndarray, values: np.ndarray, eligible: np.ndarray) -> List[Tuple[float, float, float]]:
    """
    Runs of eligible grid points whose energy variation stays below FLAT_TOLERANCE
    and that span at least FLAT_MIN_LENGTH

    Only points with at least one active pattern are eligible, so the constant
    -log(epsilon) plateau outside every support never counts as flat.
    """
    finite = np.isfinite(values) & eligible
    steps = np.abs(np.diff(values))
    calm = finite[:-1] & finite[1:] & (steps < FLAT_STEP_TOLERANCE)
    segments = []
    start = None
    for i, quiet in enumerate(np.append(calm, False)):
        if quiet and start is None:
            start = i
        elif not quiet and start is not None:
            lo, hi = start, i
            variation = float(values[lo : hi + 1].max() - values[lo : hi + 1].min())
            if grid[hi] - grid[lo] >= FLAT_MIN_LENGTH and variation < FLAT_TOLERANCE:
                segments.append((float(grid[lo]), float(grid[hi]), variation))
            start = None
    return segments


def analyze_1d_landscape(patterns: PatternSet, spec: EnergySpec, scan_points: int) -> KernelSweepRow:
    """
    Scan a 1-D energy for stored minima, novel interior minima and flat segments

    Stored patterns count as minima when neither neighbor at distance 1e-6 has
    lower energy. Novel minima are strict minima of the dense scan away from
    the stored patterns, refined by bounded scalar minimization.
    """
    if patterns.d != 1:
        raise InvalidParameterError(f"Kernel sweep needs a 1-D instance, got d={patterns.d}")
    xs = patterns.data[:, 0]
    span = float(xs.max() - xs.min()) or 1.0
    grid = np.linspace(xs.min() - 0.5 * span, xs.max() + 0.5 * span, scan_points)
    step = grid[1] - grid[0]
    values = energy_batch(grid[:, None], patterns, spec)

    def energy_at(x: float) -> float:
        return energy(np.array([x]), patterns, spec)

    stored = 0
    for xi in xs:
        centre = energy_at(xi)
        neighbors = min(energy_at(xi - STATIONARY_OFFSET), energy_at(xi + STATIONARY_OFFSET))
        if math.isfinite(centre) and neighbors >= centre:
            stored += 1

    interior = np.flatnonzero((values[1:-1] < values[:-2]) & (values[1:-1] < values[2:])) + 1
    novel = []
    for i in interior:
        if np.min(np.abs(xs - grid[i])) <= 2 * step:
            continue
        refined = minimize_scalar(energy_at, bounds=(grid[i - 1], grid[i + 1]), method="bounded", options={"xatol": 1e-12})
        novel.append(float(refined.x))

    inside = (grid >= xs.min()) & (grid <= xs.max())
    eligible = support_mask(grid[:, None], patterns, spec) & inside
    segments = _flat_segments(grid, values, eligible)
    widest = max(segments, key=lambda s: s[1] - s[0], default=None)
    return KernelSweepRow(
        kernel=spec.kernel.value,
        beta=spec.beta,
        radius=spec.radius,
        stored_minima=stored,
        novel_minima=len(novel),
        novel_locations=novel,
        flat_segment=widest is not None,
        flat_lo=widest[0] if widest else None,
        flat_hi=widest[1] if widest else None,
        flat_variation=widest[2] if widest else None,
        coexisting=stored == patterns.m and len(novel) >= 1,
        tentative=spec.kernel is not KernelId.EPANECHNIKOV,
    )


def kernel_sweep_ladder(patterns: PatternSet, ladder: LadderSpec) -> np.ndarray:
    """Default ladder: support radius from 1.5 r_min down to 0.45 r_min"""
    if ladder.low is not None or ladder.high is not None:
        return beta_ladder(patterns, ladder)
    r_min = patterns.geometry.r_min
    count = ladder.count or KERNEL_SWEEP_DEFAULT_COUNT
    low = 2.0 / (KERNEL_SWEEP_R_HIGH * r_min) ** 2
    high = 2.0 / (KERNEL_SWEEP_R_LOW * r_min) ** 2
    return np.geomspace(low, high, count)


def run_kernel_sweep(config: ExperimentConfig, base_dir=None) -> List[KernelSweepRow]:
    """
    Emergence table across kernels on a 1-D instance

    The instance is the two patterns {0, 1} unless the generator names a 1-D pattern file.

    Returns:
        One KernelSweepRow per (kernel, beta)
    """
    if config.generator.kind == "file":
        patterns = patterns_from_stanza(config.generator, base_dir=base_dir)
    else:
        patterns = PatternSet([[0.0], [1.0]])
    betas = kernel_sweep_ladder(patterns, config.ladder)

    rows = []
    for kernel in config.kernels:
        for beta in betas:
            spec = EnergySpec(kernel=kernel, beta=float(beta), epsilon=config.epsilon)
            rows.append(analyze_1d_landscape(patterns, spec, config.scan_points))
        coexist = sum(1 for r in rows if r.kernel == kernel and r.coexisting)
        flat = sum(1 for r in rows if r.kernel == kernel and r.flat_segment)
        logger.info(f"Kernel {kernel}: coexisting novel minima at {coexist}/{len(betas)} betas, flat at {flat}")
    return rows
