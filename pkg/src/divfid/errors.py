"""Exception hierarchy shared by all modules and mapped to CLI exit codes."""


class DivfidError(Exception):
    """Base class for all errors raised by divfid."""

    exit_code = 1


class ConfigurationError(DivfidError, ValueError):
    """Invalid parameters, dimensions or configuration keys."""

    exit_code = 2


class DomainError(DivfidError, ValueError):
    """Argument outside the mathematical domain of an operation."""

    exit_code = 2


class EstimationError(DivfidError):
    """A scaling exponent cannot be estimated at the requested scale."""

    exit_code = 3
