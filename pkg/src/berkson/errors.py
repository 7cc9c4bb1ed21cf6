"""Exception types shared across the package."""


class BerksonError(Exception):
    """Base class for all errors raised by this package."""


class BadParams(BerksonError, ValueError):
    pass


class BoundaryViolation(BerksonError, ValueError):
    """A threshold sits closer than sigma to the edge of [-1, 1]."""


class QueryOutsideDomain(BerksonError, ValueError):
    """A query point lies within sigma of the boundary (assumption Q)."""


class BudgetExhausted(BerksonError, RuntimeError):
    pass


class TooFewSamples(BerksonError, ValueError):
    pass


class DegenerateDomain(BerksonError, ValueError):
    pass


class DomainError(BerksonError, ValueError):
    """A probability argument lies outside the open interval (0, 1)."""


class RootNotBracketed(BerksonError, RuntimeError):
    pass


class DegenerateFit(BerksonError, ValueError):
    pass


class RegimeViolation(BerksonError, ValueError):
    pass
