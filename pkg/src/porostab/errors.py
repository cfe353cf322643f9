"""Exception hierarchy shared by every porostab module."""


class PorostabError(Exception):
    """Base class for all porostab failures."""


class DegenerateEquilibrium(PorostabError, ValueError):
    pass


class RegimeMismatch(PorostabError, ValueError):
    pass


class RhoZero(PorostabError, ValueError):
    pass


class UnsupportedDegree(PorostabError, ValueError):
    pass


class ZeroLeadingCoefficient(PorostabError, ValueError):
    pass


class DegenerateAllZero(PorostabError, ValueError):
    pass


class NoSignChange(PorostabError, ValueError):
    pass


class InvalidMesh(PorostabError, ValueError):
    pass


class SingularElement(InvalidMesh):
    pass


class QuadratureDegreeTooLow(PorostabError, AssertionError):
    pass


class NumericalFailure(PorostabError, RuntimeError):
    """Base for failures the CLI maps to exit code 3."""


class LinearSolveFailure(NumericalFailure):
    pass


class NewtonDiverged(NumericalFailure):
    pass


class SchemaError(PorostabError, ValueError):
    """Invalid configuration document; ``path`` names the offending key."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")
