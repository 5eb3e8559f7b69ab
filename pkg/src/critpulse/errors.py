"""Exception types shared across the package."""


class CritPulseError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(CritPulseError):
    """Two objects built against incompatible Hilbert spaces were combined."""


class DomainError(CritPulseError):
    """A parameter is outside the mathematically valid domain."""


class TruncationError(CritPulseError):
    """The Fock truncation is too small for the requested computation."""


class IntegrationError(CritPulseError):
    """A propagation failed (tolerance, leak or solver breakdown)."""


class ConfigError(CritPulseError):
    """A run configuration file is invalid."""
