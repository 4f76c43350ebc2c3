"""Exception hierarchy shared across the package."""


class LdpLabError(Exception):
    """Base class for all errors raised by ldplab."""


class DimensionError(LdpLabError, ValueError):
    """Vectors or operators do not belong to the same discretization."""


class LevelError(LdpLabError, ValueError):
    """Requested Galerkin level exceeds the basis capacity."""


class ConfigurationError(LdpLabError, ValueError):
    """A model, audit or experiment was configured inconsistently."""


class UnsupportedExponentError(ConfigurationError):
    pass


class EllipticityError(ConfigurationError):
    pass


class SolverError(LdpLabError, RuntimeError):
    """Time integration failed."""


class StepFailureError(SolverError):
    def __init__(self, step, message="Newton iteration did not converge"):
        super().__init__(f"{message} at step {step}")
        self.step = step


class DivergenceError(SolverError):
    def __init__(self, step):
        super().__init__(f"non-finite state at step {step}")
        self.step = step


class GuardError(LdpLabError, ValueError):
    """Noise intensity exceeds the admissible range of a gradient-noise model."""


class ResolutionError(LdpLabError, ValueError):
    pass


class BudgetError(LdpLabError, ValueError):
    """A control exceeds its quadratic energy budget."""


class InsufficientDataError(LdpLabError, ValueError):
    pass


class FormatError(LdpLabError, ValueError):
    """A persisted file does not match its declared metadata."""


class DomainError(LdpLabError, ValueError):
    """An argument lies outside its mathematical domain."""
