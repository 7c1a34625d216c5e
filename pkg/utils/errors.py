"""
Exception hierarchy shared by every package.

Each error class carries the CLI exit code it maps to, so the command line front end never needs a lookup table.
"""

from data.constants import ExitCode


class KagomeError(Exception):
    """Base class for all simulator errors."""

    exit_code = ExitCode.NUMERICAL_ERROR


class ManifestParseError(KagomeError):
    """The manifest file could not be read or is not valid YAML."""

    exit_code = ExitCode.PARSE_ERROR


class ConfigurationError(KagomeError, ValueError):
    """A configuration object or manifest field is missing or out of range."""

    exit_code = ExitCode.VALIDATION_ERROR


class ArgumentError(ConfigurationError):
    """An operation was called with arguments it cannot honor (e.g. too many eigenpairs requested)."""


class SectorError(ConfigurationError):
    """An amplitude or state does not belong to the requested fixed photon-number sector."""


class StateError(KagomeError, ValueError):
    """A state vector violates a precondition such as unit norm."""

    exit_code = ExitCode.VALIDATION_ERROR


class CapacityError(KagomeError, MemoryError):
    """A memory guard refused to build an object that would be too large."""

    exit_code = ExitCode.CAPACITY_ERROR


class NumericalError(KagomeError, ArithmeticError):
    """A numerical invariant (norm conservation, residual, finiteness) failed."""


class ContractionError(NumericalError):
    """Two tensors disagree on the dimension of a shared bond."""

    def __init__(self, message: str, bond: tuple[int, int] | None = None):
        super().__init__(message)
        self.bond = bond


class SingularEnvironmentError(NumericalError):
    """The effective normalization matrix of a site is numerically zero."""

    def __init__(self, message: str, site: int | None = None):
        super().__init__(message)
        self.site = site
