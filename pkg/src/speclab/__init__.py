"""Spectra and pseudospectra of truncated non-selfadjoint operators.

Modules
-------
numlin       dense eigenvalues, smallest singular values, resolvent norms
pseudo       resolvent-norm fields on grids, eps-pseudospectra, contours
toeplitz     banded Toeplitz symbols, winding numbers, finite sections
blockops     block-diagonally dominant operators and limit-set estimators
fourier_pde  periodic Fourier truncation of differential operators with potentials
study        Hausdorff convergence studies and pollution verdicts
emit         JSON / CSV / SVG output
cli          the ``speclab`` command
"""

from .errors import (AccuracyError, DimensionError, OnCurveError, OutOfRegionError,
                     ResolutionError, SingularBlockError, SpeclabError,
                     UndefinedDistanceError, ValidationError)
from .numlin import eigenvalues, resolvent_norm, smallest_singular_value
from .pseudo import GridSpec, PseudospectrumField, contours, field, membership, sublevel_points
from .study import hausdorff

__version__ = "0.1.0"

__all__ = [
    "AccuracyError", "DimensionError", "OnCurveError", "OutOfRegionError", "ResolutionError",
    "SingularBlockError", "SpeclabError", "UndefinedDistanceError", "ValidationError",
    "eigenvalues", "resolvent_norm", "smallest_singular_value",
    "GridSpec", "PseudospectrumField", "contours", "field", "membership", "sublevel_points",
    "hausdorff",
]
