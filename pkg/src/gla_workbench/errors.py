"""Exception hierarchy shared by the workbench modules."""


class WorkbenchError(Exception):
    """Base class for all workbench errors."""


class ConfigError(WorkbenchError, ValueError):
    """Invalid configuration or input data (usage error, CLI exit code 2)."""


class DimensionError(WorkbenchError, ValueError):
    """An array argument has the wrong shape.

    The offending field name is stored on ``field``.
    """

    def __init__(self, field, expected, got):
        self.field = field
        self.expected = expected
        self.got = got
        super().__init__(f"{field}: expected dimension {expected}, got {got}")


class NumericalError(WorkbenchError, ArithmeticError):
    """A numerical procedure failed (CLI exit code 1)."""


class ConvergenceError(NumericalError):
    """An iteration did not converge.  ``last_residual`` holds the final norm."""

    def __init__(self, message, last_residual=None, iterations=None):
        self.last_residual = last_residual
        self.iterations = iterations
        super().__init__(message)


class SingularMatrixError(NumericalError):
    pass


class DefectiveMatrixError(NumericalError):
    pass


class NonFiniteError(NumericalError):
    pass


class StaticDivergenceError(NumericalError):
    pass


class RiccatiError(NumericalError):
    """No stabilizing Riccati solution exists (or it cannot be certified)."""


class UnstableSystemError(NumericalError):
    pass


class SynthesisError(NumericalError):
    pass


class WellPosednessError(NumericalError):
    pass


class SimulationError(NumericalError):
    """Simulation blew up; ``time`` is the first time with a non-finite state."""

    def __init__(self, message, time=None):
        self.time = time
        super().__init__(message)
