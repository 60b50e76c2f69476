"""Exception types shared across the package."""


class BenchError(Exception):
    """Base class for all errors raised by pdepretrain."""


class StabilityViolation(BenchError):
    """An explicit time step exceeds the scheme's stability bound."""


class NonFiniteError(BenchError):
    """A solver state or model output contains NaN or inf.

    ``where`` carries the sample id, batch indices or epoch context.
    """

    def __init__(self, message, where=None):
        super().__init__(message)
        self.where = where


class SampleGenerationError(BenchError):
    def __init__(self, sample_id, cause):
        super().__init__(f"sample {sample_id!r} failed: {cause}")
        self.sample_id = sample_id
        self.cause = cause


class DegenerateTarget(BenchError):
    """Relative error requested against a target of zero norm."""


class ConfigError(BenchError):
    pass


class ShapeError(BenchError):
    pass
