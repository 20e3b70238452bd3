"""Exception hierarchy shared by all waveinv modules."""


class WaveInvError(Exception):
    """Base class for every error raised by the package."""


class GridError(WaveInvError):
    pass


class IncommensurateExtent(GridError):
    pass


class MarginTooSmall(GridError):
    pass


class GridMismatch(GridError):
    pass


class ValueOutOfBounds(WaveInvError, ValueError):
    pass


class FormatError(WaveInvError):
    pass


class CorruptHeader(FormatError):
    pass


class DimensionMismatch(FormatError):
    pass


class SolverError(WaveInvError):
    """Numerical failure inside a time-stepping solver."""


class CflViolation(SolverError):
    pass


class NonFiniteField(SolverError):
    pass


class TraceMismatch(WaveInvError):
    pass


class HistoryMismatch(WaveInvError):
    pass


class LineSearchFailed(WaveInvError):
    pass


class ConfigError(WaveInvError):
    pass
