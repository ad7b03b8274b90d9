"""
Patterns - Stored-pattern sets, their geometry and the generators used by every experiment
"""

import logging
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.spatial.distance import pdist, squareform

from densam.memory.errors import (
    DuplicatePatternsError,
    GridOverflowError,
    InvalidParameterError,
    InvalidPatternsError,
)

logger = logging.getLogger(__name__)

DEFAULT_GRID_CAP = 1_000_000
CSV_FLOAT_FORMAT = "%.17g"


@dataclass(frozen=True)
class GeometrySummary:
    """Pairwise distances of a pattern set and their off-diagonal minimum"""

    r_min: float
    d_matrix: np.ndarray


class PatternSet:
    """
    Immutable set of M distinct stored patterns in d dimensions

    The matrix is copied and frozen at construction, so the cached geometry
    stays valid for the life of the object.
    """

    def __init__(self, data: Union[np.ndarray, Sequence[Sequence[float]]]):
        """
        Initialize a pattern set

        Args:
            data: M x d matrix (a 1-D sequence is read as M patterns in 1-D)
        """
        arr = np.array(data, dtype=float)
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise InvalidPatternsError(f"Patterns must form a non-empty M x d matrix, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise InvalidPatternsError("Patterns contain non-finite coordinates")
        if np.unique(arr, axis=0).shape[0] != arr.shape[0]:
            raise DuplicatePatternsError("Duplicate patterns are not allowed")

        arr.setflags(write=False)
        self._data = arr

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def m(self) -> int:
        return self._data.shape[0]

    @property
    def d(self) -> int:
        return self._data.shape[1]

    def __len__(self) -> int:
        return self.m

    def __repr__(self) -> str:
        return f"PatternSet(m={self.m}, d={self.d})"

    @cached_property
    def geometry(self) -> GeometrySummary:
        return geometry(self)

    def squared_distances(self, x: np.ndarray) -> np.ndarray:
        """Exact squared Euclidean distance from x to every pattern"""
        diff = self._data - np.asarray(x, dtype=float)
        return np.einsum("ij,ij->i", diff, diff)

    def centroid(self, subset: Iterable[int]) -> np.ndarray:
        """
        Mean of the patterns in subset, rows taken in ascending index order

        This is the only place centroids are formed, so equal subsets always
        give bitwise-equal points.
        """
        index = np.array(sorted(subset), dtype=int)
        if index.size == 0:
            raise InvalidParameterError("Centroid of an empty subset is undefined")
        return self._data[index].mean(axis=0)

    def without(self, index: int) -> "PatternSet":
        """Copy of this set with one pattern removed"""
        if self.m < 2:
            raise InvalidParameterError("Cannot remove the only pattern")
        return PatternSet(np.delete(self._data, index, axis=0))


def generate_uniform(m: int, d: int, seed: int) -> PatternSet:
    """
    Sample m patterns i.i.d. from the unit hypercube [0, 1]^d

    Args:
        m: Number of patterns (>= 1)
        d: Dimension (>= 1)
        seed: Seed for the PCG64 generator

    Returns:
        PatternSet, reproducible per seed
    """
    if m < 1 or d < 1:
        raise InvalidParameterError(f"m and d must be >= 1, got m={m}, d={d}")
    rng = np.random.Generator(np.random.PCG64(seed))
    data = rng.random((m, d))
    logger.debug(f"Generated {m} uniform patterns in {d}-D (seed {seed})")
    return PatternSet(data)


def generate_grid(
    points_per_dim: int, d: int, placement: str = "center", max_points: int = DEFAULT_GRID_CAP
) -> PatternSet:
    """
    Equally spaced grid of points_per_dim^d patterns in [0, 1]^d

    Args:
        points_per_dim: Cells per axis (>= 2)
        d: Dimension (>= 1)
        placement: 'center' puts points at cell centers (i + 0.5)/k, 'corner' at i/k
        max_points: Refuse grids larger than this

    Returns:
        PatternSet with per-axis spacing 1/points_per_dim
    """
    if points_per_dim < 2:
        raise InvalidParameterError(f"points_per_dim must be >= 2, got {points_per_dim}")
    if d < 1:
        raise InvalidParameterError(f"d must be >= 1, got {d}")
    total = points_per_dim**d
    if total > max_points:
        raise GridOverflowError(f"Grid of {points_per_dim}^{d} = {total} points exceeds cap {max_points}")

    offsets = {"center": 0.5, "corner": 0.0}
    if placement not in offsets:
        raise InvalidParameterError(f"placement must be 'center' or 'corner', got '{placement}'")

    axis = (np.arange(points_per_dim) + offsets[placement]) / points_per_dim
    mesh = np.meshgrid(*([axis] * d), indexing="ij")
    data = np.stack([g.ravel() for g in mesh], axis=1)
    return PatternSet(data)


def geometry(patterns: PatternSet) -> GeometrySummary:
    """
    Pairwise Euclidean distances and their off-diagonal minimum r

    Args:
        patterns: Pattern set with M >= 2

    Returns:
        GeometrySummary; each unordered pair is computed once, so the matrix is exactly symmetric
    """
    if patterns.m < 2:
        raise InvalidParameterError("Geometry needs at least two patterns")
    condensed = pdist(patterns.data, metric="euclidean")
    d_matrix = squareform(condensed)
    d_matrix.setflags(write=False)
    return GeometrySummary(r_min=float(condensed.min()), d_matrix=d_matrix)


def critical_beta_range(patterns: PatternSet) -> Tuple[float, float]:
    """
    Sweep range (2/d, 2/r_min^2) from fully overlapping to non-overlapping balls

    At the upper end every support ball has radius r_min, so no ball strictly
    contains another pattern.
    """
    r_min = patterns.geometry.r_min
    return 2.0 / patterns.d, 2.0 / r_min**2


def disjoint_beta(patterns: PatternSet) -> float:
    """Smallest beta at which all support balls (radius r_min/2) are pairwise disjoint"""
    return 8.0 / patterns.geometry.r_min**2


def load_patterns_csv(path: Union[str, Path]) -> PatternSet:
    """
    Read patterns from a header-less CSV file, one pattern per row

    Raises:
        InvalidPatternsError: If the file is missing, empty, ragged or non-numeric
    """
    path = Path(path)
    try:
        frame = pd.read_csv(path, header=None, float_precision="round_trip")
        data = frame.to_numpy(dtype=float)
    except FileNotFoundError:
        raise InvalidPatternsError(f"Pattern file not found: {path}") from None
    except (pd.errors.EmptyDataError, pd.errors.ParserError, ValueError) as e:
        raise InvalidPatternsError(f"Malformed pattern file {path}: {e}") from e

    if np.isnan(data).any():
        raise InvalidPatternsError(f"Malformed pattern file {path}: missing or ragged values")
    logger.info(f"Loaded {data.shape[0]} patterns ({data.shape[1]}-D) from {path}")
    return PatternSet(data)


def save_patterns_csv(patterns: PatternSet, path: Union[str, Path]) -> Path:
    """Write patterns as header-less CSV with round-trip float precision"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(patterns.data).to_csv(path, header=False, index=False, float_format=CSV_FLOAT_FORMAT)
    return path


def patterns_from_stanza(stanza, base_dir: Optional[Path] = None) -> PatternSet:
    """
    Build a pattern set from a generator stanza

    Args:
        stanza: Object with kind ('uniform', 'grid' or 'file') and its fields
        base_dir: Directory that relative patterns_file paths resolve against

    Returns:
        PatternSet
    """
    if stanza.kind == "uniform":
        return generate_uniform(stanza.m, stanza.d, stanza.seed)
    if stanza.kind == "grid":
        return generate_grid(stanza.points_per_dim, stanza.d, placement=stanza.placement)
    if stanza.kind == "file":
        path = Path(stanza.patterns_file)
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        return load_patterns_csv(path)
    raise InvalidParameterError(f"Generator kind '{stanza.kind}' does not describe a fixed pattern set")
