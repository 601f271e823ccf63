"""Exception hierarchy shared by all modules."""


class HyHardyError(Exception):
    """Base class for every error raised by :mod:`hyhardy`."""


class ParameterError(HyHardyError, ValueError):
    """Invalid problem parameters.

    ``code`` identifies the violated constraint: one of ``"dimension"``,
    ``"gamma"``, ``"s"``, ``"theta"``.
    """

    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


class DomainError(HyHardyError, ValueError):
    """A radius or argument lies outside the domain of a kernel."""


class DivergenceError(HyHardyError, ArithmeticError):
    """An integral does not converge at a singular endpoint."""


class ConsistencyError(HyHardyError, ArithmeticError):
    """Two routes to the same quantity disagree beyond tolerance."""


class DegenerateInputError(HyHardyError, ValueError):
    """A Rayleigh quotient with vanishing denominator."""


class PreconditionError(HyHardyError, ValueError):
    """Inputs violate the documented preconditions of an operation."""


class NonCoerciveError(HyHardyError, ArithmeticError):
    """The quadratic form is not coercive; the operation refuses to run."""


class RegimeError(HyHardyError, ValueError):
    """Parameters fall outside the regime where a quantity is defined."""


class ConvergenceError(HyHardyError, ArithmeticError):
    """An iterative method stopped without meeting its acceptance test."""


class StiffnessError(ConvergenceError):
    """ODE integration collapsed its step size."""


class BracketError(HyHardyError, ValueError):
    """A root bracket does not enclose a sign change."""
