class DomainError(ValueError):
    """An argument lies outside the domain of the requested quantity."""


class InfeasibleSetError(DomainError):
    """The constraint set of an optimisation problem is empty."""


class ThresholdUnreachable(RuntimeError):
    """No measurement count below the cap satisfies the threshold."""


class ConditionNotMet(DomainError):
    """A sufficient condition needed for a bound does not hold."""
