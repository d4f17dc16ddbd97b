"""Exception hierarchy shared across the package."""


class RiaError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(RiaError):
    """Input violates a basic precondition (non-finite values, bad shape)."""


class DimensionError(RiaError):
    """Operands have incompatible dimensions."""


class SingularMatrixError(RiaError):
    """Matrix function undefined at a (near-)zero eigenvalue."""


class ConfigError(RiaError):
    """Invalid pipeline or metric configuration."""


class InsufficientSamplesError(RiaError):
    """Fewer than two samples for a sample covariance."""


class RankDeficiencyError(RiaError):
    """Projected dimension is not smaller than the patch count."""


class DivergenceError(RiaError):
    """Newton-Schulz iteration produced a non-finite or exploding iterate."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class FormatError(RiaError):
    """Malformed binary feature/descriptor file or manifest."""


class PipelineError(RiaError):
    """Failure inside the aggregation pipeline, tagged with the stage name."""

    def __init__(self, stage, cause):
        super().__init__(f"pipeline stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
