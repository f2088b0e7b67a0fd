"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: precondition and underdetermined
failures exit with 2, I/O and format problems with 3.
"""

__all__ = [
    "TemfriError",
    "PreconditionError",
    "UnderdeterminedError",
    "DegenerateInputError",
    "NonPhysicalRootError",
    "StageFailure",
    "BandEmptyError",
    "FormatError",
]


class TemfriError(Exception):
    """Base class for all library errors."""


class PreconditionError(TemfriError):
    """An operation was called with arguments outside its contract."""


class UnderdeterminedError(PreconditionError):
    """Too few firing times (or coefficients) to solve the linear system."""


class DegenerateInputError(TemfriError):
    """Input carries no usable signal content (all-zero, rank collapse,
    or an ambiguous nullspace)."""


class NonPhysicalRootError(TemfriError):
    """A spectral root lies too far outside the unit disk to map to a
    positive pulse width."""


class StageFailure(TemfriError):
    """A pipeline stage failed; carries the stage label and the cause."""

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"{stage}: {cause}")


class BandEmptyError(TemfriError):
    """No spectral content inside the configured frequency band."""


class FormatError(TemfriError):
    """A file did not match its expected on-disk format."""
