"""Exception hierarchy shared by the library and the CLI."""


class InvProbitError(Exception):
    """Base class for all package errors."""


class DomainError(InvProbitError, ValueError):
    """An argument lies outside the domain of the operation."""


class ConfigError(InvProbitError, ValueError):
    """An inconsistent or infeasible configuration."""


class NumericalError(InvProbitError, ArithmeticError):
    """A numerical routine failed (non-SPD matrix, retry cap, quadrature)."""


class IntegrityError(InvProbitError):
    """Persisted artifacts do not match their manifest."""
