"""Exception hierarchy shared by all modules."""


class AsymExpError(Exception):
    """Base class for every error raised by the toolkit."""


class DomainError(AsymExpError, ValueError):
    """A matrix (or eigenvalue list) lies outside the branch's admissible set."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class DimensionError(AsymExpError, ValueError):
    pass


class NotSPDError(AsymExpError, ValueError):
    pass


class NotConvexError(AsymExpError, ValueError):
    pass


class CollisionError(AsymExpError, ValueError):
    """Two sample nodes were mapped to the same gradient."""


class OriginError(AsymExpError, ValueError):
    pass


class UnsupportedDimension(AsymExpError, ValueError):
    pass


class UnsupportedDegree(AsymExpError, ValueError):
    pass


class NodeMismatch(AsymExpError, ValueError):
    pass


class TailError(AsymExpError, ArithmeticError):
    pass


class DegenerateFit(AsymExpError, ArithmeticError):
    pass


class NonConvergent(AsymExpError, ArithmeticError):
    pass


class DegreeOverflow(AsymExpError, ValueError):
    pass


class RegimeError(AsymExpError, ValueError):
    pass


class ConfigError(AsymExpError, ValueError):
    """Invalid scenario configuration; ``errors`` maps field name to message."""

    def __init__(self, errors):
        self.errors = dict(errors)
        lines = [f"{k}: {v}" for k, v in sorted(self.errors.items())]
        super().__init__("invalid configuration:\n  " + "\n  ".join(lines))
