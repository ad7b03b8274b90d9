"""
Sweep Runner - Run an experiment config, write its CSV, sidecar and report
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Union

import pandas as pd

from densam import __version__
from densam.common.io import atomic_write_text, file_sha1, write_frame_csv, write_json, write_rows_csv
from densam.common.schemas import ExperimentConfig, KernelSweepRow, MetricsRow
from densam.experiments.benchmarks import (
    align_by_index,
    run_kernel_sweep,
    run_loglik_benchmark,
    run_minima_scaling,
)

logger = logging.getLogger(__name__)

Row = Union[MetricsRow, KernelSweepRow]


@dataclass
class SweepOutcome:
    """Rows and files produced by one sweep"""

    rows: List[Row]
    ok_cells: int
    failed_cells: int
    outputs: List[Path] = field(default_factory=list)
    validation: Dict = field(default_factory=dict)


class SweepRunner:
    """Manages one experiment sweep from config to files"""

    def __init__(
        self,
        config: ExperimentConfig,
        output_dir: Optional[Union[str, Path]] = None,
        workers: int = 1,
        config_path: Optional[Union[str, Path]] = None,
    ):
        """
        Initialize sweep runner

        Args:
            config: Validated experiment config
            output_dir: Where results go (default: config.output_dir)
            workers: Cells executed in parallel
            config_path: Source of the config; relative pattern files resolve against its directory
        """
        self.config = config
        self.workers = workers
        self.base_dir = Path(config_path).parent if config_path else None
        self.results_dir = Path(output_dir or config.output_dir)
        self.results_dir.mkdir(parents=True, exist_ok=True)

    def run(self) -> SweepOutcome:
        """Execute the configured experiment and write its outputs"""
        experiment = self.config.experiment
        logger.info(f"Running {experiment} with {len(self.config.seeds)} seeds on {self.workers} workers")

        if experiment == "minima_scaling":
            rows = run_minima_scaling(self.config, workers=self.workers, base_dir=self.base_dir)
        elif experiment == "loglik_benchmark":
            rows = run_loglik_benchmark(self.config, workers=self.workers)
        else:
            rows = run_kernel_sweep(self.config, base_dir=self.base_dir)

        failed = sum(1 for r in rows if getattr(r, "status", "ok") == "error")
        outcome = SweepOutcome(rows=rows, ok_cells=len(rows) - failed, failed_cells=failed)
        if not rows:
            logger.error(f"{experiment} produced no cells")
            return outcome

        csv_path = write_rows_csv(rows, self.results_dir / f"{experiment}.csv")
        outcome.outputs.append(csv_path)

        if experiment != "kernel_sweep":
            summary = align_by_index(rows)
            if not summary.empty:
                outcome.outputs.append(
                    write_frame_csv(summary.reset_index(), self.results_dir / f"{experiment}_aligned.csv")
                )

        outcome.validation = self.validate_claims(rows)
        outcome.outputs.append(self.generate_report(outcome))
        outcome.outputs.append(self.write_sidecar(outcome))
        logger.info(f"{experiment}: {outcome.ok_cells} cells ok, {outcome.failed_cells} failed")
        return outcome

    def validate_claims(self, rows: List[Row]) -> Dict:
        """
        Check the qualitative claims an experiment is meant to reproduce

        Returns:
            {'passed': bool, 'checks': {name: {'passed', 'value', 'threshold'}}}
        """
        experiment = self.config.experiment
        checks = {}
        if experiment == "minima_scaling":
            m = self.config.generator.m
            per_seed = {}
            for r in rows:
                if r.status != "ok":
                    continue
                hit = r.novel_count > m and r.stored_recovered_lsr >= 0.6 * m
                per_seed[r.seed] = per_seed.get(r.seed, False) or hit
            value = sum(per_seed.values())
            checks["seeds_with_emergence"] = {
                "passed": value >= 0.8 * len(self.config.seeds),
                "value": float(value),
                "threshold": 0.8 * len(self.config.seeds),
            }
        elif experiment == "loglik_benchmark":
            summary = align_by_index(rows)
            if not summary.empty:
                n = len(summary)
                band = summary.iloc[n // 4 : max(n // 4 + 1, 3 * n // 4)]
                gap = float(band["avg_loglik_lsr"].mean() - band["avg_loglik_lse"].mean())
                checks["loglik_gap"] = {"passed": gap >= -0.5, "value": gap, "threshold": -0.5}
                extra = float(band["unique_lsr"].mean() - band["unique_lse"].mean())
                checks["unique_excess"] = {"passed": extra > 0, "value": extra, "threshold": 0.0}
        else:
            frame = pd.DataFrame([r.model_dump() for r in rows])
            by_kernel = frame.groupby("kernel")
            coexist = by_kernel["coexisting"].sum()
            flat = by_kernel["flat_segment"].sum()
            for kernel in ("epanechnikov", "cosine"):
                if kernel in coexist:
                    checks[f"{kernel}_midpoint"] = {
                        "passed": coexist[kernel] > 0,
                        "value": float(coexist[kernel]),
                        "threshold": 1.0,
                    }
            if "triangle" in flat:
                checks["triangle_flat"] = {"passed": flat["triangle"] > 0, "value": float(flat["triangle"]), "threshold": 1.0}
            if "triweight" in coexist:
                checks["triweight_no_emergence"] = {
                    "passed": coexist["triweight"] == 0,
                    "value": float(coexist["triweight"]),
                    "threshold": 0.0,
                }
        return {"passed": all(c["passed"] for c in checks.values()), "checks": checks}

    def generate_report(self, outcome: SweepOutcome) -> Path:
        """
        Write a plain-text summary of the sweep

        Returns:
            Path of the report
        """
        config = self.config
        report_lines = [
            "=" * 80,
            f"{config.experiment.upper()} REPORT",
            "=" * 80,
            f"Kernel: {config.kernel}",
            f"Seeds: {', '.join(str(s) for s in config.seeds)}",
            f"Cells: {len(outcome.rows)} ({outcome.ok_cells} ok, {outcome.failed_cells} failed)",
            "",
            "CLAIM CHECKS",
            "-" * 80,
            f"Overall: {'PASSED' if outcome.validation.get('passed') else 'FAILED'}",
            "",
        ]
        for check_name, check_data in outcome.validation.get("checks", {}).items():
            status = "✓" if check_data["passed"] else "✗"
            report_lines.append(
                f"{status} {check_name}: {check_data['value']:.4g} (threshold: {check_data['threshold']:.4g})"
            )
        report_lines.append("\n" + "=" * 80)

        report_path = self.results_dir / f"{config.experiment}_report.txt"
        atomic_write_text(report_path, "\n".join(report_lines) + "\n")
        logger.info(f"Report saved to {report_path}")
        return report_path

    def write_sidecar(self, outcome: SweepOutcome) -> Path:
        """JSON sidecar: config echo, version and the content hash of every data file"""
        data_files = [p for p in outcome.outputs if p.suffix == ".csv"]
        sidecar = {
            "config": self.config.model_dump(mode="json"),
            "version": __version__,
            "files": {p.name: file_sha1(p) for p in data_files},
            "ok_cells": outcome.ok_cells,
            "failed_cells": outcome.failed_cells,
            "validation": outcome.validation,
        }
        return write_json(self.results_dir / f"{self.config.experiment}.json", sidecar)
