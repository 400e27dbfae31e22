"""Exception taxonomy shared by all modules."""


class MoodError(Exception):
    """Base class for every error raised by this package."""


class InputError(MoodError, ValueError):
    """A caller-supplied value violates an operation's preconditions."""


class CalibrationError(MoodError, ValueError):
    """Calibration is impossible (empty or degenerate calibration set)."""


class ParseError(MoodError):
    """A file could not be parsed at all (bad JSON, missing header)."""


class SchemaError(MoodError):
    """A file parsed but its contents violate the expected schema."""


class MagicError(MoodError):
    """A binary file does not start with the expected magic bytes."""


class TruncatedError(MoodError):
    """A binary file ended before its declared payload was complete."""


class DecodeError(MoodError):
    """An image file exists but could not be decoded."""


class UnsupportedCodecError(MoodError):
    """The requested codec is not available in this build."""
