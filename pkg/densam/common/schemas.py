"""
Config and Result Schemas for DenseAM Experiments

Pydantic models for experiment configs read from JSON, the metric rows a
sweep emits, and the run manifest written next to every output.
"""

import json
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Type, TypeVar, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from densam.memory.kernels import KernelId, parse_kernel

ALL_KERNELS = [k.value for k in KernelId]

ModelT = TypeVar("ModelT", bound=BaseModel)


class GeneratorStanza(BaseModel):
    """How the stored patterns of an experiment are produced"""

    model_config = ConfigDict(extra="forbid")

    kind: Literal["uniform", "grid", "mixture", "file"] = Field("uniform", description="Pattern source")
    m: int = Field(20, ge=1, description="Number of patterns (uniform, mixture)")
    d: int = Field(8, ge=1, description="Dimension")
    seed: Optional[int] = Field(None, ge=0, description="Pattern seed; the run seed when omitted")
    points_per_dim: int = Field(5, ge=2, description="Grid cells per axis")
    placement: Literal["center", "corner"] = Field("center", description="Grid point placement")
    patterns_file: Optional[str] = Field(None, description="Header-less CSV of patterns (kind=file)")

    @model_validator(mode="after")
    def check_file(self):
        if self.kind == "file" and not self.patterns_file:
            raise ValueError("kind 'file' needs patterns_file")
        return self


class LadderSpec(BaseModel):
    """Inverse-temperature ladder; bounds default to the critical range of the patterns"""

    model_config = ConfigDict(extra="forbid")

    count: int = Field(20, ge=0, description="Number of rungs")
    spacing: Literal["geometric", "linear"] = "geometric"
    low: Optional[float] = Field(None, gt=0, description="Lowest beta (default 2/d)")
    high: Optional[float] = Field(None, gt=0, description="Highest beta (default from 'top')")
    top: Literal["critical", "disjoint"] = Field(
        "critical", description="Default high end: 2/r_min^2 (critical) or 8/r_min^2 (disjoint)"
    )

    @model_validator(mode="after")
    def check_bounds(self):
        if self.low is not None and self.high is not None and self.low > self.high:
            raise ValueError(f"Ladder low {self.low} exceeds high {self.high}")
        return self


class DescentSpec(BaseModel):
    """Gradient-descent budget and schedule"""

    model_config = ConfigDict(extra="forbid")

    steps: int = Field(500, ge=1)
    lr_start: float = Field(0.01, gt=0)
    lr_end: float = Field(0.0001, gt=0)
    schedule: Literal["cosine", "constant"] = "cosine"
    delta: float = Field(1e-8, gt=0, description="Convergence threshold on the gradient norm")


class MixtureSpec(BaseModel):
    """Ground-truth Gaussian mixture"""

    model_config = ConfigDict(extra="forbid")

    k: int = Field(10, ge=1)
    sigma: float = Field(0.1, gt=0)
    seed: Optional[int] = Field(None, ge=0, description="Mixture seed; the run seed when omitted")


class ExperimentConfig(BaseModel):
    """
    Full description of one sweep

    Read from JSON by load_config; every field has a desk-scale default.
    """

    model_config = ConfigDict(extra="forbid")

    experiment: Literal["minima_scaling", "loglik_benchmark", "kernel_sweep"]
    generator: GeneratorStanza = Field(default_factory=GeneratorStanza)
    kernel: str = Field("epanechnikov", description="Kernel of the compact-support energy")
    epsilon: float = Field(0.0, ge=0)
    ladder: LadderSpec = Field(default_factory=LadderSpec)
    n_queries: int = Field(500, ge=1)
    seeds: List[int] = Field(default_factory=lambda: [0], min_length=1)
    boundary_thickness: float = Field(0.01, gt=0, lt=1, description="Query shell thickness as a fraction of 2/beta")
    mc_samples: int = Field(100_000, ge=1)
    enumeration_cap: int = Field(20, ge=1)
    subset_cap: int = Field(1 << 22, ge=1)
    delta: float = Field(1e-10, gt=0, description="Stationarity threshold for enumerated memories")
    lsr_descent: DescentSpec = Field(default_factory=DescentSpec)
    lse_descent: DescentSpec = Field(default_factory=lambda: DescentSpec(steps=13000))
    mixture: MixtureSpec = Field(default_factory=MixtureSpec)
    kernels: List[str] = Field(default_factory=lambda: list(ALL_KERNELS))
    scan_points: int = Field(4001, ge=101, description="Dense 1-D scan resolution for the kernel sweep")
    output_dir: str = "results"

    @field_validator("kernel")
    @classmethod
    def validate_kernel(cls, v):
        return parse_kernel(v).value

    @field_validator("kernels")
    @classmethod
    def validate_kernels(cls, v):
        return [parse_kernel(name).value for name in v]

    @field_validator("seeds")
    @classmethod
    def validate_seeds(cls, v):
        if any(s < 0 for s in v):
            raise ValueError("Seeds must be non-negative")
        if len(set(v)) != len(v):
            raise ValueError("Seeds must be distinct")
        return v


class MetricsRow(BaseModel):
    """One (seed, beta) cell of a sweep; metrics a run does not produce stay None"""

    experiment: str
    seed: int
    ladder_index: int = Field(..., ge=0)
    beta: float = Field(..., gt=0)
    avg_loglik_lsr: Optional[float] = None
    avg_loglik_lse: Optional[float] = None
    unique_lsr: Optional[int] = Field(None, ge=0)
    unique_lse: Optional[int] = Field(None, ge=0)
    stored_recovered_lsr: Optional[int] = Field(None, ge=0)
    stored_recovered_lse: Optional[int] = Field(None, ge=0)
    novel_count: Optional[int] = Field(None, ge=0)
    support_fraction: Optional[float] = Field(None, ge=0.0, le=1.0)
    support_fraction_se: Optional[float] = Field(None, ge=0.0)
    query_checksum: Optional[str] = None
    status: Literal["ok", "error"] = "ok"
    error: Optional[str] = None


class KernelSweepRow(BaseModel):
    """Emergence behavior of one kernel at one beta on a 1-D instance"""

    kernel: str
    beta: float = Field(..., gt=0)
    radius: float
    stored_minima: int = Field(..., ge=0)
    novel_minima: int = Field(..., ge=0)
    novel_locations: List[float] = Field(default_factory=list)
    flat_segment: bool = False
    flat_lo: Optional[float] = None
    flat_hi: Optional[float] = None
    flat_variation: Optional[float] = None
    coexisting: bool = False
    tentative: bool = False


class OutputFile(BaseModel):
    path: str
    sha1: str


class RunManifest(BaseModel):
    """Provenance of one CLI invocation; written last"""

    command: str
    argv: List[str]
    version: str
    config: Optional[Dict[str, Any]] = None
    seeds: List[int] = Field(default_factory=list)
    started_at: datetime
    finished_at: datetime
    wall_clock_seconds: float = Field(..., ge=0)
    exit_status: int
    outputs: List[OutputFile] = Field(default_factory=list)


def validate_payload(payload: dict, schema: Type[ModelT]) -> ModelT:
    """
    Validate a dictionary against a schema

    Raises:
        pydantic.ValidationError: If the payload does not match
    """
    return schema.model_validate(payload)


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """Read and validate an ExperimentConfig JSON file"""
    with open(path, "r", encoding="utf-8") as f:
        payload = json.load(f)
    return validate_payload(payload, ExperimentConfig)
