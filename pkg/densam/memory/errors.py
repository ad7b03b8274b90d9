"""
Error types for the memory package

Each error carries a short machine-readable ``code`` so the CLI can map
failures onto its exit-code contract without string matching.
"""

from typing import Optional


class DenseAMError(Exception):
    """Base class for all densam library errors"""

    code = "densam_error"


class InvalidParameterError(DenseAMError, ValueError):
    """Raised when an argument is outside its mathematical domain"""

    code = "invalid_parameter"


class InvalidPatternsError(DenseAMError, ValueError):
    """Raised when a pattern matrix is empty, ragged or non-finite"""

    code = "invalid_patterns"


class DuplicatePatternsError(InvalidPatternsError):
    """Raised when two stored patterns are identical"""

    code = "duplicate_patterns"


class GridOverflowError(InvalidParameterError):
    """Raised when a grid would hold more points than the configured cap"""

    code = "grid_overflow"


class UnsupportedStartError(DenseAMError):
    """Raised when a query has an empty active set under the LSR energy with epsilon = 0"""

    code = "unsupported_start"


class AmbiguousBasinError(DenseAMError):
    """Raised when single-step retrieval is asked for a query that is not inside exactly one basin"""

    code = "ambiguous_basin"

    def __init__(self, message: str, active: tuple = ()):
        super().__init__(message)
        self.active = tuple(active)


class CycleDetectedError(DenseAMError):
    """Raised when the centroid iteration revisits an earlier, non-fixed active set"""

    code = "cycle_detected"


class NoConvergenceError(DenseAMError):
    """Raised when an iteration exhausts its safety cap"""

    code = "no_convergence"


class TooManyPatternsError(DenseAMError):
    """Raised when exhaustive subset enumeration is requested above the cap"""

    code = "too_many_patterns"


class NeighborhoodBlowupError(DenseAMError):
    """Raised when one anchor's neighborhood needs more subsets than the cap allows"""

    code = "neighborhood_blowup"

    def __init__(self, message: str, anchor: Optional[int] = None, subsets: int = 0):
        super().__init__(message)
        self.anchor = anchor
        self.subsets = subsets
