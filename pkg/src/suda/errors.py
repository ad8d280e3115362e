"""Exception types shared across the package.

Everything raised on purpose derives from SudaError so the CLI can map
library failures to exit code 1 and leave usage errors (exit 2) to argparse.
"""


class SudaError(Exception):
    """Base class for all library errors."""


class SchemaError(SudaError):
    """File header or structure does not match the documented format."""


class ParseError(SudaError):
    """A token or cell could not be parsed; message carries the location."""


class DataError(SudaError):
    """Dataset contract violation: ordering, emptiness, or label state."""


class ConfigError(SudaError):
    """Invalid argument or configuration value."""


class DegenerateDataError(SudaError):
    """Input collapsed to a point/constant where spread is required."""


class CoverageError(SudaError):
    """A binned summary received no samples on one side."""


class NumericalError(SudaError):
    """Non-finite value encountered during numerical computation."""
