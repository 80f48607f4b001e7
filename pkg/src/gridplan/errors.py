"""Exception hierarchy shared by all modules."""


class GridplanError(Exception):
    """Base class for every error raised by this package."""


class MalformedRaster(GridplanError):
    pass


class DimensionMismatch(GridplanError):
    pass


class OutOfBounds(GridplanError):
    pass


class DegenerateSegment(GridplanError):
    pass


class CandidateExplosion(GridplanError):
    """Too many WBR rectangles; raise the Hough vote threshold."""


class EmptyCandidateSet(GridplanError):
    pass


class ProposalUnavailable(GridplanError):
    """A kernel cannot build a transition from the current state."""


class InvalidSpec(GridplanError):
    pass


class ConfigError(GridplanError):
    pass


class InvariantViolation(GridplanError):
    pass
