"""Exception hierarchy.

Validation problems map to CLI exit code 2, numerical-accuracy problems to 3.
"""

from __future__ import annotations


class SpeclabError(Exception):
    """Base class for all errors raised by speclab."""

    exit_code = 1


class ValidationError(SpeclabError, ValueError):
    exit_code = 2


class DimensionError(ValidationError):
    pass


class OutOfRegionError(ValidationError):
    pass


class UndefinedDistanceError(ValidationError):
    pass


class OnCurveError(ValidationError):
    """The point lies on the symbol curve, so no winding number exists."""

    def __init__(self, point: complex, distance: float, tolerance: float):
        super().__init__(
            f"point {point} is within {tolerance:.3g} of the symbol curve "
            f"(distance {distance:.3g}); it belongs to f(unit circle)"
        )
        self.point = point
        self.distance = distance
        self.tolerance = tolerance


class SingularBlockError(ValidationError):
    pass


class AccuracyError(SpeclabError, ArithmeticError):
    exit_code = 3


class ResolutionError(AccuracyError):
    pass
