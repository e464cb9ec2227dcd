"""Exception hierarchy shared by all modules."""


class FingergrowthError(Exception):
    """Base class for all package errors."""


class ValidationError(FingergrowthError):
    """Invalid input data or arguments (bad files, violated invariants)."""


class ParseError(ValidationError):
    """A file could not be parsed at all."""


class NumericalError(FingergrowthError):
    """A numerical procedure failed (non-convergence, degenerate problem)."""


class DegenerateVarianceError(NumericalError):
    """All observations identical where variation is required."""


class DegenerateScoresError(NumericalError):
    """Score distribution has zero MAD; median/MAD normalization undefined."""
