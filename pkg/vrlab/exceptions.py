"""Exception hierarchy shared by all services."""


class LabError(Exception):
    """Base class for every error raised by the laboratory."""


class PreconditionError(LabError, ValueError):
    """Input, configuration or theorem precondition problem (exit code 3)."""


class GridTooLarge(PreconditionError):
    pass


class UnsupportedDimension(PreconditionError):
    pass


class IndexMismatch(PreconditionError):
    pass


class InvalidCoefficients(PreconditionError):
    pass


class ConfigError(PreconditionError):
    pass


class AssumptionViolated(PreconditionError):
    """A coefficient assumption failed on a probe; carries the witness."""

    def __init__(self, message: str, check: str, witness: tuple = ()):
        super().__init__(message)
        self.check = check
        self.witness = witness


class ContractionViolated(PreconditionError):
    def __init__(self, message: str, constant: float):
        super().__init__(message)
        self.constant = constant


class NumericalError(LabError):
    """A solver could not deliver a certified result."""


class BracketExhausted(NumericalError):
    def __init__(self, message: str, clamped: int):
        super().__init__(message)
        self.clamped = clamped


class RootBracketFailure(NumericalError):
    pass


class ClampedIndex(NumericalError):
    pass


class NoConvergence(NumericalError):
    def __init__(self, message: str, residual_history: list):
        super().__init__(message)
        self.residual_history = residual_history


class TheoremCheckFailed(NumericalError):
    """A post-hoc theorem assertion did not hold (exit code 2)."""

    def __init__(self, message: str, failed: list):
        super().__init__(message)
        self.failed = failed


class HypothesisFailed(NumericalError):
    def __init__(self, message: str, hypothesis: str):
        super().__init__(message)
        self.hypothesis = hypothesis
