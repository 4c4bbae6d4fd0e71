"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid grid, coefficient, flow or experiment parameters."""


class AuditFailure(AssertionError):
    """An audited inequality or identity was violated.

    ``witness`` carries whatever identifies the offending sample.
    """

    def __init__(self, message, witness=None, report=None):
        super().__init__(message)
        self.witness = witness
        self.report = report


class SolverError(RuntimeError):
    """A linear solve or eigen-iteration did not reach its tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class DivergenceError(FloatingPointError):
    """Time integration produced non-finite values."""

    def __init__(self, message, t=None, dt=None, last_good=None, columns=None):
        super().__init__(message)
        self.t = t
        self.dt = dt
        self.last_good = last_good
        self.columns = columns  # batch columns that went non-finite, if batched
