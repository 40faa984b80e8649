"""Exception types shared across the package."""


class MsglmbError(Exception):
    """Base class for package errors."""


class InvalidSequenceError(MsglmbError, ValueError):
    """A multi-object state sequence violates a structural invariant."""


class ModelError(MsglmbError, ValueError):
    """Model parameters are inconsistent or out of range."""


class NumericalError(MsglmbError, ArithmeticError):
    """A linear-algebra or likelihood computation failed."""


class DegenerateDensityError(MsglmbError, ValueError):
    """All component weights vanished; the density carries no mass."""


class EnumerationLimitError(MsglmbError, RuntimeError):
    """Brute-force enumeration would exceed the configured guard."""


class ConfigError(MsglmbError, ValueError):
    """Malformed configuration file or command-line input."""
