class RandUTVError(Exception):
    pass


class ShapeError(RandUTVError, ValueError):
    pass


class ConfigError(RandUTVError, ValueError):
    pass


class FormatError(RandUTVError, ValueError):
    """Malformed matrix file (bad magic, truncated payload, non-finite data)."""


class ConvergenceError(RandUTVError, ArithmeticError):
    def __init__(self, message, residual):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


class GraphError(RandUTVError, ValueError):
    pass


class TaskError(RandUTVError, RuntimeError):
    """A task kernel failed; `task_index` and `task` identify the culprit."""

    def __init__(self, message, task_index=None, task=None):
        super().__init__(message)
        self.task_index = task_index
        self.task = task
