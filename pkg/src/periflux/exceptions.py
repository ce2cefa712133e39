"""Exception hierarchy shared by every solver stage."""


class PerifluxError(Exception):
    """Base class; ``code`` is the machine-readable tag used in error JSON."""

    code = "error"


class InvalidParameter(PerifluxError, ValueError):
    code = "invalid-parameter"


class InvalidGeometry(PerifluxError, ValueError):
    code = "invalid-geometry"


class IncompatibleField(PerifluxError, ValueError):
    code = "incompatible-field"


class SolverFailure(PerifluxError, RuntimeError):
    code = "solver-failure"

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class DegenerateGeometry(PerifluxError, RuntimeError):
    code = "degenerate-geometry"


class NotDecomposable(PerifluxError, ValueError):
    code = "not-decomposable"


class DivergenceDetected(PerifluxError, RuntimeError):
    code = "divergence-detected"


class MaxitExceeded(PerifluxError, RuntimeError):
    code = "maxit-exceeded"


class OracleNonconvergence(PerifluxError, RuntimeError):
    code = "oracle-nonconvergence"


class InvalidOracleUse(PerifluxError, ValueError):
    code = "invalid-oracle-use"


class ConfigError(PerifluxError, ValueError):
    code = "config-parse-error"

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key
