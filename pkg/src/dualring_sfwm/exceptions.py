"""Exception types raised by the package.

All of them derive from ``ValueError`` so callers that only care about bad
input can catch that.
"""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of a formula."""


class ModelRangeError(ValueError):
    """A wavelength or frequency lies outside the dispersion model's band."""


class InsufficientDataError(ValueError):
    """Too few usable points (dips, samples) for the requested analysis."""


class ConfigurationError(ValueError):
    """A device, pump or analysis configuration is inconsistent."""
