import logging

logger = logging.getLogger(__name__)


class RmPermError(Exception):
    pass


class ArgumentError(RmPermError, ValueError):
    """Exception raised when an argument value is outside its domain."""

    pass


class CapacityError(ArgumentError):
    """Exception raised when a request would allocate too much memory."""

    pass


class ConfigurationError(RmPermError):
    """Exception raised when a decoder or simulation is configured inconsistently."""

    pass


class FrozenSetNotInvariantError(ConfigurationError):
    """
    Exception raised when a layer permutation does not map the frozen set onto
    itself, i.e. the permutation is not an automorphism of the code.
    """

    pass


class StrategyNotImplementedError(ConfigurationError):
    """Exception raised for an unimplemented early-termination strategy."""

    pass


class ConversionError(ConfigurationError):
    """Exception raised for errors of casting a string to typehinted value(s)"""

    pass


class ConversionIgnoreError(ConfigurationError):
    """
    Exception raised when a dataclass field has no configured value and can not
    be skipped, because it is neither Optional nor has a default.
    """

    pass


class NoConfigFilesFoundError(ConfigurationError):
    """
    Exception raised when no configuration files can be found
    """

    pass
