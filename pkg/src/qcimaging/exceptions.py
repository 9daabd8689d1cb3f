"""Exception hierarchy.

Two families matter to callers: :class:`ValidationError` for inputs that are
rejected before any numerics run, and :class:`NumericalError` for failures
detected while computing (caustics, non-convergence, box escape).  The CLI
maps them to exit codes 2 and 3 respectively.
"""

__all__ = [
    "ImagingError",
    "ValidationError",
    "NumericalError",
    "GridTooCoarse",
    "PacketClipped",
    "AliasRisk",
    "UnsupportedPotential",
    "MomentumOutOfRange",
    "BoxEscape",
    "StepTooLarge",
    "NoConvergence",
    "CausticSingular",
    "NearCaustic",
    "MultipleRoots",
    "DivisionNearZero",
]


class ImagingError(Exception):
    """Base class for all package errors."""


class ValidationError(ImagingError, ValueError):
    """Invalid input, detected before computation."""


class NumericalError(ImagingError, ArithmeticError):
    """A numerical procedure failed or left its domain of validity."""


class GridTooCoarse(ValidationError):
    pass


class PacketClipped(ValidationError):
    pass


class AliasRisk(ValidationError):
    pass


class UnsupportedPotential(ValidationError):
    pass


class MomentumOutOfRange(ValidationError):
    pass


class BoxEscape(NumericalError):
    pass


class StepTooLarge(NumericalError):
    pass


class NoConvergence(NumericalError):
    pass


class CausticSingular(NumericalError):
    pass


class NearCaustic(CausticSingular):
    """Newton derivative dx_f/dp_i fell below the caustic threshold."""


class MultipleRoots(NumericalError):
    def __init__(self, message, roots=()):
        super().__init__(message)
        self.roots = list(roots)


class DivisionNearZero(NumericalError):
    pass
