"""Exception types shared across the package."""


class ValidationError(ValueError):
    """An input violates a documented contract (bad value, bad schema)."""


class ConvergenceError(RuntimeError):
    """An iterative procedure failed to reach its stopping condition.

    Carries the partial protocol trace (when one exists) for post-mortem.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class ProtocolAbort(RuntimeError):
    """A protocol run was aborted; the diagnostic names the offending party."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class OracleError(RuntimeError):
    """The brute-force search could not produce an admissible answer."""
