"""Exception hierarchy shared across the package."""


class RdmeError(Exception):
    """Base class for all package-specific errors."""


class ModelError(RdmeError):
    """Model file or model object is malformed or dimensionally inconsistent."""


class NegativePopulationError(RdmeError):
    """An update would drive a copy number below zero; signals a solver bug."""


class NumericError(RdmeError):
    """Non-finite rates, overflow, or an unbounded-growth guard tripped."""


class ConfigurationError(RdmeError):
    """A solver was invoked with missing or inconsistent configuration."""


class StateSpaceCeilingError(RdmeError):
    """A truncated state space exceeds the configured enumeration ceiling."""
