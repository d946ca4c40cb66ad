"""Exception hierarchy shared by the solver, network and CLI layers."""


class FCTLError(Exception):
    """Base class for all package errors."""


class InstabilityError(FCTLError):
    """Mean arrivals per cycle reach or exceed the green capacity."""

    def __init__(self, message, rho=None, queue=None):
        super().__init__(message)
        self.rho = rho
        self.queue = queue


class NumericsError(FCTLError):
    """Root finding, linear solve or inversion failed its accuracy contract."""


class ConfigError(FCTLError):
    """Configuration document is malformed or violates the schema."""
