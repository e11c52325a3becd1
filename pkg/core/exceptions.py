from django.core.exceptions import ValidationError


class InvalidParameter(ValidationError):
    """A precondition of an operation does not hold."""


class ResolutionError(InvalidParameter):
    """The nonlocal grid does not resolve the kernel support (h_nl > eps*R/4)."""


class CflViolation(InvalidParameter):
    """Explicit time step above the stability limit of the generator."""


class SimulationError(Exception):
    """Runtime failure while computing a result."""


class NonFiniteState(SimulationError):
    def __init__(self, step, time, message=None):
        self.step = step
        self.time = time
        super().__init__(message or f"non-finite state at step {step} (t={time:.6g})")


class ConvergenceFailure(SimulationError):
    def __init__(self, message, last_norm=None, kappa=None):
        self.last_norm = last_norm
        self.kappa = kappa
        super().__init__(message)


class SolveError(SimulationError):
    pass


class InsufficientData(SimulationError):
    pass
