"""Exception hierarchy shared by the library and the CLI."""


class GroupShapError(Exception):
    """Base class for all library errors."""


class ValidationError(GroupShapError, ValueError):
    """Malformed user input (partition, model or distribution spec)."""


class CapacityError(GroupShapError):
    """Player count exceeds the 63-bit coalition mask width."""


class EnumerationRefused(GroupShapError):
    """Exact enumeration refused because the player count exceeds the safety cap."""


class NotPositiveDefiniteError(GroupShapError):
    """Covariance matrix rejected; carries the smallest eigenvalue."""

    def __init__(self, message, min_eigenvalue):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue


class SingularBlockError(GroupShapError):
    """Conditioning block is numerically singular."""

    def __init__(self, message, condition_number):
        super().__init__(message)
        self.condition_number = condition_number


class DegenerateModelError(GroupShapError):
    """Model output has (numerically) zero spread and cannot be standardized."""


class ConditionsNotMet(GroupShapError):
    """Additive separability or group independence does not hold."""
