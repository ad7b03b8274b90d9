"""
densam CLI - Batch front end for retrieval, enumeration, beta search, sweeps and kernel tables

Exit codes: 0 ok, 2 bad input, 3 domain error, 4 oracle mismatch, 5 sweep without a successful cell.
"""

import argparse
import json
import logging
import math
import sys
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv
from pydantic import ValidationError

from densam import __version__
from densam.common.config_validator import (
    ConfigurationError,
    EnvironmentValidator,
    mc_samples_override,
    thread_count,
)
from densam.common.io import dumps_json, hashed_outputs, read_matrix_csv, write_frame_csv, write_json
from densam.common.logging_config import setup_logging
from densam.common.schemas import RunManifest, load_config
from densam.experiments.sampling import support_fraction_estimate
from densam.experiments.sweep_runner import SweepRunner
from densam.memory.emergence import (
    DEFAULT_DELTA,
    DEFAULT_ENUMERATION_CAP,
    DEFAULT_SUBSET_CAP,
    beta_search,
    brute_force_minima,
    classify_emergence,
    compare_memory_sets,
    mean_interactions,
)
from densam.memory.energy import EnergySpec
from densam.memory.errors import (
    AmbiguousBasinError,
    CycleDetectedError,
    InvalidParameterError,
    InvalidPatternsError,
    NeighborhoodBlowupError,
    NoConvergenceError,
    TooManyPatternsError,
    UnsupportedStartError,
)
from densam.memory.kernels import KernelId, kernel_table
from densam.memory.patterns import load_patterns_csv
from densam.memory.retrieval import ConstantSchedule, fixed_point_iteration, gradient_descent, single_step_retrieve

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_DOMAIN = 3
EXIT_MISMATCH = 4
EXIT_NO_CELLS = 5

INPUT_ERRORS = (
    InvalidPatternsError,
    InvalidParameterError,
    ValidationError,
    ConfigurationError,
    json.JSONDecodeError,
    OSError,
)
DOMAIN_ERRORS = (
    UnsupportedStartError,
    AmbiguousBasinError,
    CycleDetectedError,
    NoConvergenceError,
    TooManyPatternsError,
    NeighborhoodBlowupError,
)


@dataclass
class RunContext:
    """What a command produced, for the manifest"""

    outputs: List[Path] = field(default_factory=list)
    config: Optional[Dict[str, Any]] = None
    seeds: List[int] = field(default_factory=list)
    default_manifest: Optional[Path] = None


def _emit(payload: Any, out: Optional[str], ctx: RunContext) -> None:
    if out:
        ctx.outputs.append(write_json(out, payload))
        logger.info(f"Wrote {out}")
    else:
        sys.stdout.write(dumps_json(payload))


def _energy_spec(args) -> EnergySpec:
    return EnergySpec(kernel=args.kernel, beta=args.beta, epsilon=args.epsilon)


def cmd_retrieve(args, ctx: RunContext) -> int:
    """Retrieve a memory from every query row"""
    patterns = load_patterns_csv(args.patterns)
    queries = read_matrix_csv(args.query, patterns.d)
    spec = _energy_spec(args)

    results = []
    for query in queries:
        if args.mode == "single":
            point = single_step_retrieve(query, patterns, spec, verify=args.verify)
            results.append({"point": point, "steps": 1, "converged": True})
        elif args.mode == "fixedpoint":
            outcome = fixed_point_iteration(query, patterns, spec, on_cycle=args.on_cycle)
            results.append(
                {
                    "point": outcome.point,
                    "steps": outcome.iterations,
                    "converged": True,
                    "subset": list(outcome.subset),
                    "cycle_detected": outcome.cycle_detected,
                }
            )
        else:
            outcome = gradient_descent(query, patterns, spec, args.steps, ConstantSchedule(args.lr), delta=args.delta)
            results.append({"point": outcome.point, "steps": outcome.steps, "converged": outcome.converged})

    _emit({"mode": args.mode, "kernel": spec.kernel.value, "beta": spec.beta, "results": results}, args.out, ctx)
    return EXIT_OK


def cmd_enumerate(args, ctx: RunContext) -> int:
    """Enumerate and classify every memory; --oracle cross-checks against the exhaustive search"""
    patterns = load_patterns_csv(args.patterns)
    spec = EnergySpec(kernel=KernelId.EPANECHNIKOV, beta=args.beta, epsilon=args.epsilon)
    workers = args.workers or thread_count()
    report = classify_emergence(patterns, spec, delta=args.delta, subset_cap=args.subset_cap, workers=workers)

    if args.oracle:
        exhaustive = brute_force_minima(patterns, spec, delta=args.delta, cap=args.cap)
        only_pruned, only_exhaustive = compare_memory_sets(report.memories, exhaustive)
        if only_pruned or only_exhaustive:
            logger.error(
                f"Oracle mismatch: {len(only_pruned)} subsets only in the pruned search, "
                f"{len(only_exhaustive)} only in the exhaustive search"
            )
            _emit({"only_pruned": only_pruned, "only_exhaustive": only_exhaustive}, args.out, ctx)
            return EXIT_MISMATCH
        logger.info(f"Oracle agrees on {len(exhaustive)} memories")

    payload = {
        "beta": spec.beta,
        "memories": [m.to_dict() for m in report.memories],
        "stored_recovered": report.stored_recovered,
        "novel_count": report.novel_count,
        "globally_emergent": report.globally_emergent,
        "epsilon_star": report.epsilon_star,
    }
    _emit(payload, args.out, ctx)
    return EXIT_OK


def cmd_beta_search(args, ctx: RunContext) -> int:
    """Find the beta that yields a target mean number of interacting patterns"""
    patterns = load_patterns_csv(args.patterns)
    beta = beta_search(patterns, args.target_k, n_max=args.max_iter)
    radius = math.sqrt(2.0 / beta)
    _emit({"beta": beta, "radius": radius, "mean_interactions": mean_interactions(patterns, radius)}, args.out, ctx)
    return EXIT_OK


def cmd_sweep(args, ctx: RunContext) -> int:
    """Run an experiment config end to end"""
    config = load_config(args.config)
    override = mc_samples_override()
    if override is not None and "mc_samples" not in config.model_fields_set:
        config = config.model_copy(update={"mc_samples": override})
    workers = args.workers or thread_count()

    runner = SweepRunner(config, output_dir=args.out_dir, workers=workers, config_path=args.config)
    ctx.config = config.model_dump(mode="json")
    ctx.seeds = list(config.seeds)
    ctx.default_manifest = runner.results_dir / "manifest.json"

    outcome = runner.run()
    ctx.outputs.extend(outcome.outputs)
    if outcome.ok_cells == 0:
        logger.error(f"No successful cells in {config.experiment}")
        return EXIT_NO_CELLS
    return EXIT_OK


def cmd_kernels(args, ctx: RunContext) -> int:
    """Print the kernel moment and efficiency table"""
    table = kernel_table()
    sys.stdout.write(table.to_string(index=False, float_format=lambda v: f"{v:.6f}") + "\n")
    if args.out:
        ctx.outputs.append(write_frame_csv(table, args.out))
    return EXIT_OK


def cmd_support_fraction(args, ctx: RunContext) -> int:
    """Monte Carlo estimate of the supported volume of [0, 1]^d"""
    patterns = load_patterns_csv(args.patterns)
    spec = EnergySpec(kernel=args.kernel, beta=args.beta)
    samples = args.samples or mc_samples_override() or 100_000
    estimate = support_fraction_estimate(patterns, spec, samples, args.seed)
    ctx.seeds = [args.seed]
    _emit(estimate._asdict(), args.out, ctx)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="densam", description="Dense associative memory experiments")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR (default: env LOG_LEVEL)")
    parser.add_argument("--manifest", default=None, help="Write a run manifest to this path")
    parser.add_argument("--version", action="version", version=f"densam {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    kernels = [k.value for k in KernelId]

    retrieve = sub.add_parser("retrieve", help="Retrieve memories from query points")
    retrieve.add_argument("--patterns", required=True, help="Header-less CSV of stored patterns")
    retrieve.add_argument("--query", required=True, help="Header-less CSV of query points")
    retrieve.add_argument("--kernel", default="epanechnikov", choices=kernels)
    retrieve.add_argument("--beta", type=float, required=True)
    retrieve.add_argument("--epsilon", type=float, default=0.0)
    retrieve.add_argument("--mode", choices=["gd", "single", "fixedpoint"], default="fixedpoint")
    retrieve.add_argument("--steps", type=int, default=1000, help="Descent steps (gd)")
    retrieve.add_argument("--lr", type=float, default=0.01, help="Constant learning rate (gd)")
    retrieve.add_argument("--delta", type=float, default=1e-8, help="Gradient-norm convergence threshold (gd)")
    retrieve.add_argument("--on-cycle", choices=["resolve", "raise"], default="resolve")
    retrieve.add_argument("--verify", action="store_true", help="Cross-check the single step numerically")
    retrieve.add_argument("--out", default=None)
    retrieve.set_defaults(handler=cmd_retrieve)

    enumerate_ = sub.add_parser("enumerate", help="Enumerate and classify all memories")
    enumerate_.add_argument("--patterns", required=True)
    enumerate_.add_argument("--beta", type=float, required=True)
    enumerate_.add_argument("--epsilon", type=float, default=0.0)
    enumerate_.add_argument("--delta", type=float, default=DEFAULT_DELTA)
    enumerate_.add_argument("--oracle", action="store_true", help="Cross-check against exhaustive enumeration")
    enumerate_.add_argument("--cap", type=int, default=DEFAULT_ENUMERATION_CAP, help="Largest M for --oracle")
    enumerate_.add_argument("--subset-cap", type=int, default=DEFAULT_SUBSET_CAP)
    enumerate_.add_argument("--workers", type=int, default=None, help="Default: env DENSAM_THREADS")
    enumerate_.add_argument("--out", default=None)
    enumerate_.set_defaults(handler=cmd_enumerate)

    search = sub.add_parser("beta-search", help="Binary search for beta by mean interaction count")
    search.add_argument("--patterns", required=True)
    search.add_argument("--target-k", type=float, required=True)
    search.add_argument("--max-iter", type=int, default=50)
    search.add_argument("--out", default=None)
    search.set_defaults(handler=cmd_beta_search)

    sweep = sub.add_parser("sweep", help="Run an experiment config")
    sweep.add_argument("--config", required=True, help="ExperimentConfig JSON")
    sweep.add_argument("--out-dir", default=None, help="Override the config's output_dir")
    sweep.add_argument("--workers", type=int, default=None, help="Default: env DENSAM_THREADS")
    sweep.set_defaults(handler=cmd_sweep)

    table = sub.add_parser("kernels", help="Kernel moments and efficiencies")
    table.add_argument("--out", default=None, help="Also write the table as CSV")
    table.set_defaults(handler=cmd_kernels)

    support = sub.add_parser("support-fraction", help="Monte Carlo support volume")
    support.add_argument("--patterns", required=True)
    support.add_argument("--beta", type=float, required=True)
    support.add_argument("--kernel", default="epanechnikov", choices=kernels)
    support.add_argument("--samples", type=int, default=None)
    support.add_argument("--seed", type=int, default=0)
    support.add_argument("--out", default=None)
    support.set_defaults(handler=cmd_support_fraction)

    return parser


def _write_manifest(path: Path, args, argv: List[str], ctx: RunContext, started: datetime, elapsed: float, status: int):
    manifest = RunManifest(
        command=args.command,
        argv=argv,
        version=__version__,
        config=ctx.config,
        seeds=ctx.seeds,
        started_at=started,
        finished_at=datetime.now(timezone.utc),
        wall_clock_seconds=elapsed,
        exit_status=status,
        outputs=hashed_outputs(ctx.outputs),
    )
    write_json(path, manifest)
    logger.info(f"Manifest saved to {path}")


def main(argv: Optional[List[str]] = None) -> int:
    """Entry point; returns the process exit code"""
    load_dotenv()
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    setup_logging("densam", level=args.log_level)

    ctx = RunContext()
    started = datetime.now(timezone.utc)
    clock = time.perf_counter()
    try:
        EnvironmentValidator.validate_environment()
        status = args.handler(args, ctx)
    except DOMAIN_ERRORS as e:
        logger.error(f"{args.command} failed ({e.code}): {e}")
        status = EXIT_DOMAIN
    except INPUT_ERRORS as e:
        logger.error(f"{args.command} rejected its input: {e}")
        status = EXIT_INPUT

    manifest_path = Path(args.manifest) if args.manifest else ctx.default_manifest
    if manifest_path is not None:
        _write_manifest(manifest_path, args, argv, ctx, started, time.perf_counter() - clock, status)
    return status


if __name__ == "__main__":
    sys.exit(main())
