"""Exception hierarchy shared by every package."""

from typing import Optional

from config.constants import EXIT_CODES
from utils.error_messages import get_error_message


class LabError(Exception):
    """Base class; carries a greppable class name and a CLI exit code."""

    exit_code = EXIT_CODES['runtime']

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message

    @property
    def error_class(self) -> str:
        return type(self).__name__

    @classmethod
    def from_key(cls, error_key: str, **kwargs) -> "LabError":
        """Build the error from the shared message table."""
        return cls(get_error_message(error_key, **kwargs))


class UsageError(LabError):
    exit_code = EXIT_CODES['usage']


class ConfigurationError(LabError):
    exit_code = EXIT_CODES['config']


# Autodiff
class ShapeError(LabError):
    pass


class DomainError(LabError):
    pass


class ContractError(LabError):
    pass


class GradCheckError(LabError):
    pass


# Model
class CapacityError(LabError):
    pass


class VocabularyError(LabError):
    pass


class AdapterStateError(LabError):
    pass


# Groups
class RoutingError(LabError):
    pass


class GroupValidationError(ConfigurationError):
    pass


class GroupLookupError(LabError):
    pass


class AmbiguousLanguageError(GroupLookupError):
    pass


# Data
class DataError(LabError):
    pass


class RecordParseError(DataError):
    """Malformed record line; `line` is 1-based."""

    def __init__(self, message: str, line: Optional[int] = None):
        super().__init__(message)
        self.line = line


# Training
class SequencingError(ConfigurationError):
    pass


class FrozenTensorError(LabError):
    pass


# Checkpoints
class CheckpointVersionError(LabError):
    pass


class CheckpointIntegrityError(LabError):
    pass
