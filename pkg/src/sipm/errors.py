"""Exception hierarchy shared by the solver modules."""


class SIPMError(Exception):
    """Base class for all library errors."""


class DomainError(SIPMError, ValueError):
    """A point is on the boundary of, or outside, the cone."""


class InternalConsistencyError(SIPMError):
    """A quadratic form that must be positive came out negative."""


class IllPosedConstraintsError(SIPMError):
    """The equality constraints are rank deficient or numerically singular."""


class EstimatedStationary(SIPMError):
    """The residual ``m + A^T lambda`` vanished, so no direction exists.

    Not a failure: the current iterate is stationary with respect to the
    current gradient estimate.
    """


class InvariantViolation(SIPMError):
    """An iterate left the strictly feasible set (numerical or logic fault)."""


class ConfigurationError(SIPMError, ValueError):
    """Invalid solver or experiment configuration."""


class DataError(SIPMError, ValueError):
    """Malformed or inconsistent problem data."""
