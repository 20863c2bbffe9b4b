"""Exception types raised across the package."""


class ConfigurationError(ValueError):
    """Invalid case id, factor name, quadrant index or config key."""


class DomainError(ValueError):
    """Input outside the admissible domain of a model."""


class NumericError(ArithmeticError):
    """Singular system, non-finite activation or non-finite objective term."""


class GenerationError(RuntimeError):
    """Data generation failed for a specific record."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class SizeError(ValueError):
    """Requested split sizes exceed the available data."""


class TrainingError(RuntimeError):
    """Training aborted (e.g. repeated non-finite loss)."""
