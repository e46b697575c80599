"""Exception types raised across the package."""


class SparseDistError(Exception):
    """Base class for all package errors."""


class ValidationError(SparseDistError, ValueError):
    """Invalid user input (bad arguments, malformed files)."""


class NumericalError(SparseDistError, ArithmeticError):
    """A numerical stage could not produce a result."""


class DegenerateNeighborhood(NumericalError):
    """The local weighted design is singular at some evaluation point."""


class NoValidBandwidth(NumericalError):
    """Every bandwidth candidate produced a degenerate fit."""


class EigenFailure(NumericalError):
    pass


class NoPositiveEigenvalue(NumericalError):
    pass


class SingularCovariance(NumericalError):
    pass


class DimensionMismatch(ValidationError):
    pass


class AllZeroDissimilarities(ValidationError):
    pass


class InvalidK(ValidationError):
    pass


class LabelMismatch(ValidationError):
    pass


class EmptyInput(ValidationError):
    pass


class ParseError(ValidationError):
    """Raised with every rejected row collected in ``errors``."""

    def __init__(self, errors):
        self.errors = list(errors)
        head = "; ".join(f"line {ln}: {msg}" for ln, msg in self.errors[:5])
        more = f" (+{len(self.errors) - 5} more)" if len(self.errors) > 5 else ""
        super().__init__(f"{len(self.errors)} malformed row(s): {head}{more}")


class MissingArtifact(SparseDistError, FileNotFoundError):
    pass


class SigmaClampWarning(UserWarning):
    """The error-variance estimate was negative and has been set to 0."""
