"""Exception hierarchy shared by all pathfolio modules."""


class PathfolioError(ValueError):
    """Base class for every error raised by pathfolio."""


class LevelError(PathfolioError):
    """A partition level outside ``1..finest_level`` was requested."""


class GridMismatchError(PathfolioError):
    """Two paths that must share a grid (or level) do not."""


class DimensionError(PathfolioError):
    """Array shapes or asset counts do not line up."""


class PositivityError(PathfolioError):
    """A strictly positive path contains a value <= 0."""


class SimplexError(PathfolioError):
    """Weights leave the simplex (negative component or wrong total)."""


class CallbackError(PathfolioError):
    """A user-supplied callback raised or returned a malformed value."""


class IngestError(PathfolioError):
    """Base class for CSV ingestion failures."""


class MissingColumnError(IngestError):
    pass


class NonpositivePriceError(IngestError, PositivityError):
    pass


class UnparsableRowError(IngestError):
    pass


class TooFewRowsError(IngestError):
    pass
