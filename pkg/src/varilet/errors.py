"""Exception types shared across the varilet pipeline."""


class VariletError(Exception):
    """Base class for all varilet-specific failures."""


class NoApogeeError(VariletError):
    """Raised when apogees are requested for a global extremum.

    A global extremum's region is the whole middle space, which has no
    boundary and therefore no apogee.
    """


class NotDownwardClosedError(VariletError):
    """Raised when simplification coefficients keep a region but drop one of
    its ancestors."""


class ImproperSimplificationError(VariletError):
    """Raised when simplification coefficients drop nothing or drop everything."""


class LensInvalidError(VariletError):
    """Raised when lens construction cannot produce a structure that later
    stages can rely on (for example an unresolvable conflict under a
    restricted policy)."""


class UnsupportedMiddlePointError(VariletError):
    """Raised when a middle-space query point lands on a vertex instead of an
    edge interior."""


class InsufficientDataError(VariletError):
    """Raised when a sample set is too small or too degenerate to fit."""
