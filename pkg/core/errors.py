"""Exception hierarchy and process exit codes."""

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_ACCEPTANCE = 2
EXIT_CONVERGENCE = 3


class PruneBoundError(Exception):
    """Base class for every error raised by this package."""
    exit_code = EXIT_ACCEPTANCE


class DimensionError(PruneBoundError, ValueError):
    """Operand shapes do not chain."""
    exit_code = EXIT_CONFIG


class ParameterError(PruneBoundError, ValueError):
    """A numeric parameter is outside its admissible range."""
    exit_code = EXIT_CONFIG


class ConfigError(PruneBoundError):
    """Experiment configuration failed validation."""
    exit_code = EXIT_CONFIG


class AcceptanceError(PruneBoundError):
    """An oracle or reference-value check failed."""
    exit_code = EXIT_ACCEPTANCE

    def __init__(self, message, failures=None):
        super().__init__(message)
        self.failures = list(failures or [])


class ConvergenceError(PruneBoundError, ArithmeticError):
    """Power iteration hit its cap before the Rayleigh quotient settled."""
    exit_code = EXIT_CONVERGENCE

    def __init__(self, message, last_iterate=None, iterations=0, estimate=float('nan')):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.iterations = iterations
        self.estimate = estimate
