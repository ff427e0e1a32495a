"""Exception types raised across the package."""


class StratDRError(Exception):
    """Base class for all package errors."""


class NotPositiveDefinite(StratDRError):
    """Cholesky pivot fell below the floor; the design is (near) collinear."""


class DidNotConverge(StratDRError):
    """An iterative fitter hit its iteration cap."""


class ArmTooSmall(StratDRError):
    """A treatment arm has fewer units than regression features."""


class MissingOracle(StratDRError):
    """An oracle-only quantity was requested on observed-only data."""


class TooLarge(StratDRError):
    """Exhaustive enumeration requested beyond its size limit."""


class ConfigError(StratDRError, ValueError):
    """Invalid configuration value."""
