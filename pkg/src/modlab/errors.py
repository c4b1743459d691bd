"""Exception types shared across the package."""


class ModlabError(Exception):
    """Base class for all modlab errors."""


class BoundsError(ModlabError, ValueError):
    """A numeric argument is outside its supported range."""


class ExponentError(BoundsError):
    """Exponent p outside the supported range."""


class CapabilityError(ModlabError):
    """Operation not available for this space or approximation."""


class FamilySpecError(ModlabError, ValueError):
    """Curve family specification is malformed or not usable here."""


class DegenerateContinuumError(ModlabError, ValueError):
    """A continuum argument has too few cells to carry a diameter."""


class SizeError(ModlabError, ValueError):
    """Instance too large for a brute-force operation."""


class ClassificationError(ModlabError):
    """Curve does not span the fundamental domain; carries its diameter."""

    def __init__(self, message, diameter=None):
        super().__init__(message)
        self.diameter = diameter


class GeometryError(ModlabError, ValueError):
    """A geometric precondition (ring fit, connected restriction) fails."""


class PreconditionError(ModlabError, ValueError):
    """An operation was called on input violating its contract."""
