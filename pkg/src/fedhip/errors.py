"""Exception hierarchy shared by every fedhip module."""


class FedhipError(Exception):
    """Base class for all errors raised by this package."""


class DataError(FedhipError):
    """Invalid numeric payload: non-finite entries, bad labels, bad shapes."""


class SingularMatrixError(FedhipError):
    """A linear system could not be solved reliably.

    ``pivot`` is the 1-based index of the leading minor at which the
    symmetric factorization broke down, when known.
    """

    def __init__(self, message: str, pivot: int | None = None):
        super().__init__(message)
        self.pivot = pivot


class ProtocolError(FedhipError):
    """Client/server exchange violated the protocol contract."""


class EmptyFederationError(ProtocolError):
    """A global model was requested before any client was absorbed."""


class ConfigError(FedhipError):
    """An experiment or partition configuration is infeasible or invalid."""


class BundleFormatError(FedhipError):
    """Base class for feature-bundle file parse errors."""


class BundleMagicError(BundleFormatError):
    """The file does not start with the expected magic bytes."""


class BundleVersionError(BundleFormatError):
    """The file declares an unsupported format version."""


class BundleTruncatedError(BundleFormatError):
    """The file ends before the payload declared in its header."""


class BundleDimensionError(BundleFormatError):
    """The header declares dimensions that are zero, absurd, or inconsistent."""
