"""Exception hierarchy shared by all modules."""


class AqcError(Exception):
    """Base class for errors raised by aqclab."""


class ContractViolation(AqcError, ValueError):
    """Arguments break an operation's precondition (shape, range, dimension)."""


class ValidationError(AqcError, ValueError):
    """Input data is malformed (non-Hermitian matrix, bad file, invalid clause...)."""


class ResourceLimitError(AqcError):
    """Requested size exceeds a configured memory or enumeration cap."""


class NumericalError(AqcError, ArithmeticError):
    """Non-finite values appeared during a computation."""


class DivergenceError(NumericalError):
    """Norm drift of an evolution exceeded its tolerance."""

    def __init__(self, message, step=None, drift=None):
        super().__init__(message)
        self.step = step
        self.drift = drift


class SolverError(AqcError):
    """An iterative eigensolver did not converge."""

    def __init__(self, message, best_residual=None):
        super().__init__(message)
        self.best_residual = best_residual


class GenerationError(AqcError):
    """The instance generator exhausted its restart budget."""

    def __init__(self, message, attempts=None):
        super().__init__(message)
        self.attempts = attempts
