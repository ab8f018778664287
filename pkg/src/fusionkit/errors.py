"""Exception and warning types shared across the package."""


class FusionkitError(Exception):
    """Base class for all fusionkit errors."""


class DimensionMismatchError(FusionkitError, ValueError):
    """Input dimensions disagree with a model or with each other."""


class InsufficientDataError(FusionkitError, ValueError):
    """Too few samples to estimate the requested model."""


class SchemaError(FusionkitError, ValueError):
    """A structured input file violates its format."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class FlatCurveError(FusionkitError, ValueError):
    """Curve fitting is degenerate because the data carry no shape."""


class DegeneratePointWarning(RuntimeWarning):
    """Both class densities underflowed; the posterior defaulted to 0.5."""
