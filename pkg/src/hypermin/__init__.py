"""Minimal surfaces in cusp ends of hyperbolic 3-manifolds and of M x S^1."""

__version__ = "0.1.0"

from .exceptions import ConfigError, DomainError, HyperminError, NumericalError  # noqa: E402

__all__ = ["__version__", "HyperminError", "DomainError", "NumericalError", "ConfigError"]
