"""Exception types raised by the library.

Each carries a short machine-readable ``code`` used by the command line
front end when it refuses a request.
"""


class LDPError(Exception):
    code = "ERROR"


class OutsideRange(LDPError, ValueError):
    """Vector has a component on a mode where the noise eigenvalue vanishes."""

    code = "OUTSIDE_RANGE"


class AssumptionViolated(LDPError, ValueError):
    """A scheme fails a structural assumption needed by the requested formula."""

    code = "ASSUMPTION_VIOLATED"


class NotSymplectic(AssumptionViolated):
    code = "NOT_SYMPLECTIC"


class EtaZero(LDPError, ValueError):
    code = "ETA_ZERO"


class DivergentMoment(LDPError, ValueError):
    """Exponential moment requested beyond its convergence threshold."""

    code = "EPS_OUT_OF_RANGE"


class NumericalError(LDPError, RuntimeError):
    code = "NUMERICAL_ERROR"


class TailTooDeep(LDPError, ValueError):
    code = "TAIL_TOO_DEEP"


class ConfigError(LDPError, ValueError):
    code = "CONFIG_ERROR"

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
