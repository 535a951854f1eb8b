"""Exception hierarchy; the CLI maps these onto exit codes."""


class EnclosureError(Exception):
    """Base class for all package errors."""


class ConfigurationError(EnclosureError, ValueError):
    """Invalid geometry, parameter, or configuration file."""


class NumericalError(EnclosureError, RuntimeError):
    """A solver or quadrature failed to reach its tolerance."""

    def __init__(self, message: str, achieved: float | None = None):
        super().__init__(message)
        self.achieved = achieved


class FitError(NumericalError):
    """Too few usable samples to fit the decay model."""
