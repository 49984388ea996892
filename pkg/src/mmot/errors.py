"""Exception hierarchy shared by every module."""


class MMOTError(Exception):
    """Base class; the CLI maps these to exit code 1."""


class InvalidDomain(MMOTError, ValueError):
    pass


class InvalidInput(MMOTError, ValueError):
    pass


class TensorTooLarge(MMOTError):
    pass


class InfeasiblePlan(MMOTError, ValueError):
    pass


class NotExchangeable(MMOTError, ValueError):
    pass


class BlockStructureViolation(MMOTError):
    def __init__(self, message, offending=None):
        super().__init__(message)
        self.offending = offending or []


class SolverFailure(MMOTError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class Unconverged(MMOTError):
    """Raised by iterative solvers; ``report`` holds the partial result."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class NotEquallyWeighted(MMOTError, ValueError):
    pass


class BudgetExceeded(MMOTError):
    pass


class Unsupported(MMOTError):
    pass
