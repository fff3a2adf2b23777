class StagError(Exception):
    """Base class for solver errors."""


class MeshError(StagError, ValueError):
    pass


class ConfigError(StagError, ValueError):
    """Invalid run configuration; ``key`` names the offending entry."""

    def __init__(self, message, key=None):
        super().__init__(f"{key}: {message}" if key else message)
        self.key = key


class PositivityError(StagError, ArithmeticError):
    """Density or internal energy left the admissible set."""

    def __init__(self, message, cell=None, step=None):
        super().__init__(message)
        self.cell = cell
        self.step = step


class NonFiniteError(StagError, ArithmeticError):
    pass


class VacuumError(StagError, ValueError):
    pass


class AuditNotReady(StagError, LookupError):
    """An audit needs more time levels than have been recorded."""
