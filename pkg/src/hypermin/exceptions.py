class HyperminError(Exception):
    """Base class for all errors raised by hypermin."""


class DomainError(HyperminError, ValueError):
    """An argument lies outside the domain where the operation is defined."""


class NumericalError(HyperminError, RuntimeError):
    """A numerical procedure failed to reach its tolerance.

    ``diagnostics`` carries whatever trace the failing routine collected
    (energy history, quadrature error estimates, ...).
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ConfigError(HyperminError, ValueError):
    """Invalid run configuration (maps to CLI exit code 2)."""
