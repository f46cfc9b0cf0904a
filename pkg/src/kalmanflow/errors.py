"""Exception hierarchy shared by every module of the package."""


class KalmanFlowError(Exception):
    """Base class for all errors raised by kalmanflow."""


class ParseError(KalmanFlowError, ValueError):
    """Malformed system or control description.

    ``line`` and ``column`` are 1-based and point at the offending token.
    """

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"line {line}, column {column}: {message}"
        super().__init__(message)


class ValidationError(KalmanFlowError, ValueError):
    """Well-formed input that violates a domain invariant."""


class DimensionError(KalmanFlowError, ValueError):
    """Operands of incompatible dimensions."""


class ControlOutOfSet(KalmanFlowError, ValueError):
    """A control value lies outside the admissible control set."""


class NotLocallyControllable(KalmanFlowError):
    """Steering was requested for a system without a full-rank certificate."""


class NoConvergence(KalmanFlowError, ArithmeticError):
    """A series did not reach its tail threshold within the term cap."""


class EpsilonSearchFailed(KalmanFlowError, ArithmeticError):
    """No admissible epsilon was found by the halving search."""


class NewtonDivergence(KalmanFlowError, ArithmeticError):
    """Newton iteration exceeded its budget or stopped decreasing the residual."""


class InternalError(KalmanFlowError, RuntimeError):
    """An invariant that cannot fail for valid input did fail."""
