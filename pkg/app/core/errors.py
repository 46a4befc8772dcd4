"""
Engine exceptions

Every error carries an ``exit_code`` the CLI returns when the error
escapes a command (1 = usage/config, 2 = data).
"""
from typing import Optional


# ==================== BASE ====================

class KwsError(Exception):
    """Base engine exception"""
    exit_code = 2

    def __init__(self, message: str, exit_code: int = None, payload: dict = None):
        super().__init__(message)
        self.message = message
        if exit_code is not None:
            self.exit_code = exit_code
        self.payload = payload

    def to_dict(self) -> dict:
        rv = dict(self.payload or ())
        rv['error'] = self.message
        rv['type'] = type(self).__name__
        rv['exit_code'] = self.exit_code
        return rv


# ==================== USAGE ERRORS (exit 1) ====================

class ConfigError(KwsError):
    """Invalid configuration value, unknown key or config mismatch"""
    exit_code = 1


class UsageError(KwsError):
    """Bad command invocation"""
    exit_code = 1


# ==================== DATA ERRORS (exit 2) ====================

class DataError(KwsError):
    """Base class for problems with input data or artifacts"""
    exit_code = 2


class FormatError(DataError):
    """Malformed header or wrong magic"""


class UnsupportedCodecError(DataError):
    """Audio encoding the loader does not handle"""


class UnsupportedVersionError(FormatError):
    """Binary format version other than the supported one"""


class CorruptionError(DataError):
    """Truncated payload or manifest/shape mismatch"""


class EmptyInputError(DataError):
    """Input too short or empty"""


class DimensionError(DataError):
    """Shape mismatch between data and configuration"""


class NumericError(DataError):
    """Non-finite intermediate value"""

    def __init__(self, message: str, index: Optional[int] = None, **kwargs):
        payload = kwargs.pop('payload', None) or {}
        if index is not None:
            payload['index'] = index
        super().__init__(message, payload=payload, **kwargs)
        self.index = index


class DomainError(DataError):
    """Value outside the mathematical domain of an operation"""


class AlignmentError(DataError):
    """Alignment result that cannot be used (e.g. begin after end)"""


class DegenerateSignalError(DataError):
    """Signal with zero power"""


class DegenerateNoiseError(DataError):
    """Noise with zero power"""


class EmptyEvaluationError(DataError):
    """Evaluation set without keywords and without negative audio"""


__all__ = [
    'KwsError',
    'ConfigError',
    'UsageError',
    'DataError',
    'FormatError',
    'UnsupportedCodecError',
    'UnsupportedVersionError',
    'CorruptionError',
    'EmptyInputError',
    'DimensionError',
    'NumericError',
    'DomainError',
    'AlignmentError',
    'DegenerateSignalError',
    'DegenerateNoiseError',
    'EmptyEvaluationError',
]
