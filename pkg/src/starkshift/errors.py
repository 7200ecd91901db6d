"""Exception hierarchy shared across the package.

The CLI maps these onto exit-code categories, so raising the right class
matters more than the message text.
"""


class StarkshiftError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(StarkshiftError):
    """A constructor or operation received an out-of-contract value."""


class OutOfRangeError(StarkshiftError):
    """A frequency window, shift or position falls outside the modeled range."""


class InvalidPreparationError(StarkshiftError):
    """A structure-preparation recipe is geometrically inconsistent."""


class PreconditionError(StarkshiftError):
    """A solver stability / resolution precondition is violated; refuse to run."""


class NumericalFailureError(StarkshiftError):
    """NaN or blow-up detected mid-run.  Carries the z-slab index."""

    def __init__(self, message: str, slab: int | None = None):
        super().__init__(message)
        self.slab = slab


class ConfigError(StarkshiftError):
    """Scenario configuration failed to parse or validate."""
