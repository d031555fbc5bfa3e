"""Exception hierarchy.

Everything raised on bad input derives from :class:`EEGError`; the CLI maps
these to exit code 2 and anything else to exit code 1.
"""


class EEGError(Exception):
    pass


class ConfigError(EEGError, ValueError):
    pass


class SizeError(EEGError, ValueError):
    pass


class ShapeError(EEGError, ValueError):
    pass


class FormatError(EEGError):
    pass


class CorruptionError(FormatError):
    def __init__(self, expected: int, actual: int, path=None):
        self.expected = expected
        self.actual = actual
        where = f" in {path}" if path is not None else ""
        super().__init__(
            f"truncated payload{where}: expected {expected} bytes, got {actual}"
        )


class ValidationError(EEGError, ValueError):
    pass


class RangeError(EEGError, ValueError):
    pass


class TrainingError(EEGError, RuntimeError):
    pass
