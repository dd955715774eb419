"""Exception types shared across the package."""


class GalaError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(GalaError):
    """Operands have incompatible or invalid shapes."""


class DegenerateInputError(GalaError):
    """Structurally valid input that is numerically degenerate (zero norm, empty class, ...)."""


class DomainError(GalaError):
    """A value lies outside the mathematical domain of the operation."""


class ConfigError(GalaError):
    """Invalid experiment, dataset, or training configuration."""


class ParseError(GalaError):
    """Malformed input file."""


class DivergedError(GalaError):
    """Training produced a non-finite loss."""

    def __init__(self, message: str, epoch: int, batch: int):
        super().__init__(message)
        self.epoch = epoch
        self.batch = batch
