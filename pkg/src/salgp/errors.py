"""Exception types shared across the package."""


class DimensionMismatchError(ValueError):
    """Inputs disagree on dimensionality."""


class NotFittedError(RuntimeError):
    """Operation requires a fitted model."""


class NumericalError(RuntimeError):
    """A numerical routine failed beyond recoverable limits."""


class UnsupportedMarginalError(NotImplementedError):
    """No closed form is available for this kernel/measure pairing.

    Raised instead of silently falling back to numeric integration.
    """


class DegenerateCandidateError(ValueError):
    """Candidate coincides with a noise-free training point.

    The bordered covariance is singular there, so the acquisition value
    is undefined; optimizers should treat the point as infeasible.
    """


class ResourceLimitError(RuntimeError):
    """A guard on node or memory budgets was exceeded."""


class ConfigError(ValueError):
    """Invalid experiment configuration file."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
