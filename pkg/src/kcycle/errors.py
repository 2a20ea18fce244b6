"""Exception types shared across the solver modules."""


class KcycleError(Exception):
    """Base class for all errors raised by this package."""


class DslError(KcycleError):
    """Syntax or validation error in a vector-field expression.

    Carries the character offset plus 1-based line/column of the offending
    token so front ends can point at the exact spot.
    """

    def __init__(self, message, offset=None, line=None, column=None):
        self.offset = offset
        self.line = line
        self.column = column
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)


class DomainError(KcycleError):
    """Expression evaluation left its domain (division by zero, sqrt of a
    negative, overflow). `component` and `subexpression` identify where."""

    def __init__(self, message, subexpression=None, component=None):
        self.subexpression = subexpression
        self.component = component
        super().__init__(message)

    def __str__(self):
        msg = super().__str__()
        if self.component is not None:
            msg = f"component {self.component}: {msg}"
        if self.subexpression is not None:
            msg = f"{msg} in '{self.subexpression}'"
        return msg


class DimensionError(KcycleError):
    """Inconsistent dimensions between fields, weights, or points."""


class StepLimitError(KcycleError):
    """The integrator ran out of steps (or the step size collapsed)."""


class FlowDomainError(KcycleError):
    """Field evaluation failed somewhere along a trajectory."""

    def __init__(self, message, time=None):
        self.time = time
        super().__init__(message)


class NewtonDivergenceError(KcycleError):
    """Newton iteration failed to reach the tolerance."""

    def __init__(self, message, residual_norm=None, iterations=None):
        self.residual_norm = residual_norm
        self.iterations = iterations
        super().__init__(message)


class SingularJacobianError(KcycleError):
    """The Newton system matrix is numerically singular."""

    def __init__(self, message, sigma_min=None):
        self.sigma_min = sigma_min
        super().__init__(message)


class InfeasibleWeightsError(KcycleError):
    """No probability weighting drives the residual below tolerance."""

    def __init__(self, message, residual=None):
        self.residual = residual
        super().__init__(message)


class BoundaryWeightError(KcycleError):
    """The best weighting pins some weight at the positivity floor."""

    def __init__(self, message, pinned=()):
        self.pinned = tuple(pinned)
        super().__init__(message)


class ClosureError(KcycleError):
    """A solved cycle failed the independent final-leg closure check."""


class BranchLostError(KcycleError):
    """Continuation could not advance past the recorded delta."""

    def __init__(self, message, last_delta=None):
        self.last_delta = last_delta
        super().__init__(message)


class ScenarioError(KcycleError):
    """Malformed scenario file or inconsistent scenario contents."""


class RecordError(KcycleError):
    """Malformed or internally inconsistent cycle record file."""
