"""Exception types shared across the package."""


class SurgailisError(Exception):
    """Base class for all package errors."""


class CapExceeded(SurgailisError):
    """A configuration is too large for an exhaustive subset enumeration."""


class DuplicatePoint(SurgailisError, ValueError):
    """Two points of a configuration coincide."""


class PreconditionViolated(SurgailisError, ValueError):
    pass


class DomainError(SurgailisError, ValueError):
    pass


class TruncationUnsound(SurgailisError):
    """A certified truncation tail was requested for a function with no declared bound."""


class InsufficientReplicas(SurgailisError):
    pass


class ConfigError(SurgailisError, ValueError):
    """Invalid run configuration (CLI exit code 2)."""
