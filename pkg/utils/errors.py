from typing import Dict, Optional


class HybridTrigError(Exception):
    """Base class for every error raised by the hybridtrig pipeline."""

    exit_code = 2

    def __init__(self, message: str, details: Optional[Dict] = None):
        super().__init__(message)
        self.details = details or {}

    @property
    def name(self) -> str:
        return type(self).__name__


class RegistryMismatch(HybridTrigError):
    """Operands live over different variable registries."""
    exit_code = 3


class SubstitutionDenominatorVanishes(HybridTrigError):
    """A composed denominator is identically zero."""
    exit_code = 4


class PoleAtPoint(HybridTrigError):
    """Numeric evaluation hit a denominator below the pole threshold."""
    exit_code = 5


class ExpressionSyntaxError(HybridTrigError):
    """Malformed parametrization or polynomial text."""
    exit_code = 6

    def __init__(self, message: str, position: int = -1, details: Optional[Dict] = None):
        if position >= 0:
            message = f"{message} (at position {position})"
        super().__init__(message, details)
        self.position = position


class NonlinearTrigArgument(HybridTrigError):
    """A trig argument is not of the form alpha*t + phase."""
    exit_code = 7


class KindClash(HybridTrigError):
    """A parameter is used with a kind that does not match its signature block."""
    exit_code = 8


class AbsentParameter(HybridTrigError):
    """A declared parameter does not occur in the parametrization."""
    exit_code = 9


class InvalidPhase(HybridTrigError):
    """An exact phase pair is not a point of the unit circle or hyperbola."""
    exit_code = 10


class IdenticallyUndefined(HybridTrigError):
    """A component becomes undefined everywhere on the torus."""
    exit_code = 11


class NamedConstantUnsupported(HybridTrigError):
    """The operation needs numeric values for named constants."""
    exit_code = 12


class ResourceBudgetExceeded(HybridTrigError):
    """Buchberger's algorithm ran out of its pair budget."""
    exit_code = 13


class NonpositiveRadius(HybridTrigError):
    """A sphere radius is not strictly positive."""
    exit_code = 14


class RadiusOrderViolated(HybridTrigError):
    """Rolling and fixed radii are in the wrong order."""
    exit_code = 15


class InvalidJobConfig(HybridTrigError):
    """Command-line options do not form a valid job."""
    exit_code = 16
