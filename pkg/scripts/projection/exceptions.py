"""
Exception types raised by the projection library.

Library code raises these; the command-line front end catches
``ProjectionError`` and turns it into an exit status.
"""

from typing import Optional


class ProjectionError(Exception):
    """Base class for all library errors."""


class DegenerateMomentError(ProjectionError):
    """
    A moment has zero sample variance, so it cannot be studentized.

    Attributes:
        index: Zero-based index of the offending moment
    """

    def __init__(self, index: int):
        self.index = index
        super().__init__(f"degenerate moment {index}")


class SimplexStallError(ProjectionError):
    """The simplex iteration cap was hit before an optimal basis was found."""

    def __init__(self, iterations: int):
        self.iterations = iterations
        super().__init__(f"simplex stall after {iterations} pivots")


class IllConditionedSurrogateError(ProjectionError):
    """The kriging correlation matrix stayed singular at the largest nugget."""

    def __init__(self, nugget: float):
        self.nugget = nugget
        super().__init__(f"ill-conditioned surrogate (nugget {nugget:g})")


class ConfigurationError(ProjectionError):
    """
    A configuration value failed validation.

    Attributes:
        field: Dotted path of the offending field, when known
    """

    def __init__(self, message: str, field: Optional[str] = None):
        self.field = field
        text = f"{field}: {message}" if field else message
        super().__init__(text)
