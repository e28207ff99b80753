"""Exception hierarchy with machine-readable codes.

Every error carries a ``code`` (stable string used in CLI reports) and an
``exit_status`` used by the command-line front end.
"""


class GeoGateError(Exception):
    code = "GeoGateError"
    exit_status = 10


class NonHermitianInput(GeoGateError, ValueError):
    code = "NonHermitianInput"


class BadEmbedding(GeoGateError, ValueError):
    code = "BadEmbedding"


class DimensionMismatch(GeoGateError, ValueError):
    code = "DimensionMismatch"


class DegenerateInvariant(GeoGateError):
    code = "DegenerateInvariant"
    exit_status = 3


class GaugeDiscontinuity(GeoGateError):
    code = "GaugeDiscontinuity"


class GridMismatch(GeoGateError, ValueError):
    code = "GridMismatch"


class NonUnitaryPropagator(GeoGateError):
    code = "NonUnitaryPropagator"
    exit_status = 6


class NoRootInBracket(GeoGateError):
    code = "NoRootInBracket"


class OutOfDomain(GeoGateError, ValueError):
    code = "OutOfDomain"


class UnreachablePhase(GeoGateError, ValueError):
    code = "UnreachablePhase"


class NoCommensurateCycle(GeoGateError):
    code = "NoCommensurateCycle"
    exit_status = 5


class ConstraintViolated(GeoGateError):
    code = "ConstraintViolated"
    exit_status = 4


class BlockLeakage(GeoGateError):
    code = "BlockLeakage"


class ConfigParseError(GeoGateError, ValueError):
    """Bad command-line or config-file input.

    ``field`` names the offending parameter and ``line`` the config-file
    line number, when known.
    """

    code = "ConfigParseError"
    exit_status = 2

    def __init__(self, message, field=None, line=None):
        super().__init__(message)
        self.field = field
        self.line = line
