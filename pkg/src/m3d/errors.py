"""Exception types shared across the package."""


class InvalidArgumentError(ValueError):
    """Inputs violate a documented precondition (shape, range, flag value)."""


class DegenerateGeometryError(RuntimeError):
    """Point configuration has too little spread for rigid registration."""


class EmptyEvaluationError(RuntimeError):
    """No valid pixels survive masking, so the requested statistic is undefined."""


class NumericalFailureError(RuntimeError):
    """A loss term produced a non-finite value.

    `term` names the offending term so failures can be localized.
    """

    def __init__(self, term: str, message: str = ""):
        self.term = term
        super().__init__(message or f"non-finite value in term '{term}'")


class DivergenceError(RuntimeError):
    """Optimization diverged. Carries the trace recorded up to the failure."""

    def __init__(self, message: str, trace=None):
        self.trace = trace if trace is not None else []
        super().__init__(message)
