"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: configuration/validation problems
(ManifestError, SplitError, ConfigError, ValueError) exit with 2, bad or
unreadable data (FormatError, UnsupportedDtypeError, DataError, ShapeError,
I/O failures) with 3, anything unexpected with 4.
"""


class PixelbenchError(Exception):
    """Base class for all package-specific errors."""


class FormatError(PixelbenchError):
    """A file does not conform to its binary or textual format."""


class UnsupportedDtypeError(FormatError):
    """A tensor file declares a dtype outside the supported set."""


class DataError(PixelbenchError):
    """Structurally valid input carries unusable values (NaN/Inf, bad labels,
    missing referenced files)."""


class ShapeError(PixelbenchError):
    """Array dimensions do not match what an operation requires."""


class ManifestError(PixelbenchError):
    """A dataset manifest violates its schema; message names the field path."""


class SplitError(PixelbenchError):
    """Train/test split materialization called on an incompatible manifest."""


class ConfigError(PixelbenchError):
    """Bad CLI/config-file combination."""
