"""Exception hierarchy shared by the solver modules."""


class CorrectorError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(CorrectorError):
    pass


# market model

class InvalidParameters(CorrectorError):
    pass


class SingularVolatility(CorrectorError):
    pass


class NonFiniteValue(CorrectorError):
    """The frictionless value function is infinite (discount rate too small)."""


class DegenerateDiffusion(CorrectorError):
    pass


class IllPosedCorrector(CorrectorError):
    pass


# grid solver

class StencilOutOfDomain(CorrectorError):
    pass


class SingularSystem(CorrectorError):
    pass


class LinearSolveFailure(CorrectorError):
    pass


class MaxItersExceeded(CorrectorError):
    pass


class DomainTooSmall(CorrectorError):
    pass


# oracles

class DegenerateInput(CorrectorError):
    pass


class InapplicableStructure(CorrectorError):
    pass


class UnboundedDirection(CorrectorError):
    pass


class NoNTRegion(CorrectorError):
    pass


class NonConvergence(CorrectorError):
    pass


# regions

class EmptyNTRegion(CorrectorError):
    pass


class UnsupportedDimension(CorrectorError):
    pass


# output

class OutputError(CorrectorError):
    """Writing an artifact failed."""
