"""Exception types shared across the package."""


class SolverError(Exception):
    """Base class for failures of the implicit time stepper."""


class NonConvergence(SolverError):
    """Inner fixed-point iteration exhausted its iteration budget."""

    def __init__(self, message, step=None, residual=None):
        super().__init__(message)
        self.step = step
        self.residual = residual


class PositivityLoss(SolverError):
    """An inner iterate produced a non-positive density.

    Signals that the time step is too large for the inner solver, not a
    failure of the scheme itself; the driver may retry with a smaller dt.
    """

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class TopologyError(ValueError):
    """Grids are not nested the way a transfer operator requires."""


class PlanError(ValueError):
    """A sample plan violates one of its invariants."""


class ConfigError(ValueError):
    """Configuration text could not be parsed or validated.

    Carries the offending key and line number when known.
    """

    def __init__(self, message, key=None, line=None):
        if key is not None and line is not None:
            message = f"{message} (key '{key}', line {line})"
        elif key is not None:
            message = f"{message} (key '{key}')"
        elif line is not None:
            message = f"{message} (line {line})"
        super().__init__(message)
        self.key = key
        self.line = line
