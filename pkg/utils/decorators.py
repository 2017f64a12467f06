"""Decorators for command handlers."""

import logging
import sys
from functools import wraps

from pydantic import ValidationError

from config.constants import EXIT_CODES
from utils.errors import LabError
from utils.logging_config import log_error_with_context

logger = logging.getLogger(__name__)


def _first_line(text: str) -> str:
    return " ".join(str(text).split())


def report_error(error_class: str, message: str):
    """The single machine-greppable failure line."""
    print(f"error: {error_class}: {_first_line(message)}", file=sys.stderr)


def handles_lab_errors(func):
    """
    Turn a handler's failures into an exit code.

    Usage:
        @handles_lab_errors
        def train_command(args) -> int:
            ...

    LabError maps to its own exit code, pydantic.ValidationError to the config
    code, OSError to the runtime code. Anything else propagates.
    """
    @wraps(func)
    def wrapper(*args, **kwargs) -> int:
        try:
            result = func(*args, **kwargs)
            return EXIT_CODES['ok'] if result is None else result
        except LabError as e:
            log_error_with_context(logger, e, {'command': func.__name__})
            report_error(e.error_class, e.message)
            return e.exit_code
        except ValidationError as e:
            errors = e.errors()
            first = errors[0] if errors else {}
            location = '.'.join(str(part) for part in first.get('loc', ())) or e.title
            report_error('ConfigurationError',
                         f"{location}: {first.get('msg', str(e))} ({len(errors)} validation errors)")
            return EXIT_CODES['config']
        except OSError as e:
            log_error_with_context(logger, e, {'command': func.__name__})
            report_error(type(e).__name__, f"{e.strerror or e}{f': {e.filename}' if e.filename else ''}")
            return EXIT_CODES['runtime']

    return wrapper
