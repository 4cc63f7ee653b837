"""Exception hierarchy shared by all modules."""


class VortexError(Exception):
    """Base class for package errors."""


class ConfigurationError(VortexError, ValueError):
    """Invalid parameters, grids or configuration files."""


class GeometryError(VortexError, ValueError):
    """A requested contour, point or window does not fit the data support."""


class SolverError(VortexError, RuntimeError):
    """A numerical solve did not reach its tolerance."""


class NewtonStagnationError(SolverError):
    """Newton made no progress; the last iterate is kept for inspection."""

    def __init__(self, message, iterate=None, history=None):
        super().__init__(message)
        self.iterate = iterate
        self.history = list(history or [])


class BarrierError(SolverError):
    """The monotone scheme was requested without an ordered barrier pair."""


class FieldFormatError(VortexError, ValueError):
    """A field file is malformed, truncated or of an unknown version."""


class VerificationError(VortexError):
    """A verification threshold was exceeded."""
