"""Exception hierarchy shared by all smsb modules.

Each error family maps to a distinct CLI exit code (see cli.EXIT_CODES).
"""


class SmsbError(Exception):
    """Base class for all errors raised by this package."""


class InvalidPartitionError(SmsbError):
    """Requested spatial/spectral partition is impossible for the cube."""


class NumericInputError(SmsbError):
    """Non-finite or otherwise unusable numeric input."""


class ShapeError(SmsbError):
    """Matrix/mask/plan dimensions do not agree."""


class ResourceLimitError(SmsbError):
    """An operation would exceed a configured memory cap."""


class InsufficientDataError(SmsbError):
    """Too few samples to carry out the requested operation."""


class DegenerateDataError(SmsbError):
    """Input data is degenerate (e.g. all-zero training stream)."""


class EmptyMaskError(SmsbError):
    """Block selection produced no active blocks."""


class DegenerateLabelsError(SmsbError):
    """Labels do not contain enough classes for training."""


class DegenerateSplitError(SmsbError):
    """A train/test split left some class without training samples."""


class ModelMismatchError(SmsbError):
    """Model does not match the data it is applied to."""


class FormatError(SmsbError):
    """A file does not conform to the smsb on-disk formats."""


class ConfigError(SmsbError):
    """Invalid or inconsistent configuration."""


class OracleScopeError(SmsbError):
    """Brute-force oracle invoked beyond its intended desk scale."""
