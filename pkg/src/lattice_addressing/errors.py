"""Exception types raised across the package."""


class AddressingError(Exception):
    """Base class for errors raised by this package."""


class GeometryError(AddressingError, ValueError):
    """Standing-wave or lattice geometry cannot satisfy the node condition."""


class IntegrationError(AddressingError, RuntimeError):
    """The ODE integrator could not complete (step-size underflow, etc.)."""


class ThresholdNotReached(AddressingError, ValueError):
    """A fidelity target is not attained anywhere on a scanned curve."""


class ConfigError(AddressingError, ValueError):
    """Invalid run configuration. ``key`` names the offending entry."""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key
