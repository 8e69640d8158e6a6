"""Shared exception types."""


class LomitError(Exception):
    """Base class for all package errors."""


class DimensionError(LomitError):
    """Tensor shapes or resolutions do not satisfy an operation's contract."""


class DomainError(LomitError):
    """Values are outside an operation's admissible range."""


class ConfigurationError(LomitError):
    """A config, manifest, or palette is malformed or inconsistent."""


class ContractError(LomitError):
    """A required component (e.g. a loss term) is missing from a report."""


class CheckpointError(LomitError):
    """Checkpoint is corrupt, truncated, or has an incompatible version."""


class NumericError(LomitError):
    """A computation produced (or received) non-finite values."""
