"""Error taxonomy shared across the pipeline.

The CLI maps these onto exit codes: usage problems exit 1, data/schema
problems exit 2, protocol (ordering/missing-artifact) problems exit 3.
"""


class RttbenchError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(RttbenchError):
    """Invalid configuration value; the message names the violated invariant."""


class DomainError(RttbenchError):
    """Input outside an operation's domain (empty trace, bad pair, ...)."""


class SchemaError(RttbenchError):
    """Feature schema / column layout mismatch."""


class ParseError(RttbenchError):
    """Malformed tool output; carries a line number where possible."""

    def __init__(self, message, line_no=None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class FormatError(RttbenchError):
    """Dataset/report file format problem (version or column mismatch)."""


class ProtocolError(RttbenchError):
    """Evaluation protocol violation or missing upstream artifact."""
