"""Exception hierarchy shared by the billing, dispatch and CLI layers."""


class StorageSimError(Exception):
    """Base class for all package errors."""


class ConfigError(StorageSimError):
    """A tariff, battery or simulation configuration is invalid."""


class DataError(StorageSimError):
    """Input data (load profile, schedule CSV) is malformed or inconsistent."""


class DomainError(StorageSimError, ValueError):
    """A quantity is evaluated outside its mathematical domain."""


class ConstraintError(StorageSimError, ValueError):
    """A dispatch decision violates a battery or converter limit."""


class PolicyError(StorageSimError):
    """The controller has no action defined for the requested situation."""


class InvariantError(DataError):
    """A simulation invariant broke mid-run.

    ``step`` carries the offending step index when known.
    """

    def __init__(self, message: str, step: int | None = None):
        if step is not None:
            message = f"step {step}: {message}"
        super().__init__(message)
        self.step = step


class VerificationError(StorageSimError):
    """An oracle check found a gap beyond its bound."""
