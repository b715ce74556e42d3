"""Exception types shared across the package."""


class ASDError(Exception):
    """Base class for all package errors."""


class ContractError(ASDError, ValueError):
    """An input violates an operation's preconditions."""


class DataIOError(ASDError, OSError):
    """A file could not be read or written."""


class TrainingError(ASDError, RuntimeError):
    """Optimisation diverged (non-finite loss)."""
