"""Exception types shared across the package."""


class IosfdError(Exception):
    """Base class for all package errors."""


class GeometryError(IosfdError):
    """Invalid geometry (coincident anchors, zero link distance, bad counts)."""


class ConfigError(IosfdError):
    """Invalid configuration file or override; message carries the field path."""


class NumericalError(IosfdError):
    """A linear-algebra or root-finding step failed beyond recoverable limits."""


class ConvergenceError(IosfdError):
    """The alternating optimizer violated its monotone-ascent guarantee."""
