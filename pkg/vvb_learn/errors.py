class VVBError(Exception):
    """Base class for every error raised by vvb_learn."""


class ConfigError(VVBError, ValueError):
    """Invalid run configuration or command-line flags."""


class DomainError(VVBError, ValueError):
    """Input outside the domain of a numerical operation."""


class RankError(DomainError):
    """Calibration points do not span three dimensions."""


class ShapeMismatchError(VVBError, ValueError):
    """Array, image or model shapes do not agree."""


class PathError(VVBError, OSError):
    """Output location cannot be created or written."""


class TrainingDivergedError(VVBError, ArithmeticError):
    """Loss became NaN or infinite during training."""


class FormatError(VVBError, ValueError):
    """A VVBD / VVBM file cannot be decoded."""


class MagicMismatchError(FormatError):
    def __init__(self, expected: bytes, found: bytes):
        self.expected = expected
        self.found = found
        super().__init__(
            'Bad magic bytes: expected {!r}, found {!r}'.format(
                expected, found
            )
        )


class VersionMismatchError(FormatError):
    def __init__(self, found: int, supported: int):
        self.found = found
        self.supported = supported
        super().__init__(
            'Unsupported format version {} (this build reads version {})'
            .format(found, supported)
        )


class TruncatedFileError(FormatError):
    def __init__(self, needed: int, available: int):
        self.needed = needed
        self.available = available
        super().__init__(
            'File truncated: needed {} bytes, only {} available'.format(
                needed, available
            )
        )
