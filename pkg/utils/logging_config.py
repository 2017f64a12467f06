"""Logging configuration for the lab."""

import logging
import re
import sys
from pathlib import Path
from typing import Optional

CONSOLE_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
FILE_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(funcName)s:%(lineno)d - %(message)s'
DATE_FORMAT = '%Y-%m-%d %H:%M:%S'

_TAG = re.compile(r'^\[(STAGE|CMD):[^\]]*\]')


class ColoredFormatter(logging.Formatter):
    """Console formatter: colored level names, bold stage and command tags."""

    LEVEL_COLORS = {
        'DEBUG': '\033[36m',
        'INFO': '\033[32m',
        'WARNING': '\033[33m',
        'ERROR': '\033[31m',
        'CRITICAL': '\033[35m',
    }
    BOLD = '\033[1m'
    RESET = '\033[0m'

    def format(self, record: logging.LogRecord) -> str:
        record = logging.makeLogRecord(record.__dict__)
        color = self.LEVEL_COLORS.get(record.levelname)
        if color:
            record.levelname = f"{color}{record.levelname}{self.RESET}"
        message = record.getMessage()
        tagged = _TAG.match(message)
        if tagged:
            record.msg = f"{self.BOLD}{tagged.group(0)}{self.RESET}{message[tagged.end():]}"
            record.args = None
        return super().format(record)


def _drop_lab_handlers(root: logging.Logger):
    for handler in list(root.handlers):
        if getattr(handler, '_lab_handler', False):
            root.removeHandler(handler)
            handler.close()


def setup_logging(log_level: str = 'INFO', log_file: Optional[str] = None) -> logging.Logger:
    """
    Install the lab's console handler and, optionally, a file handler.

    Console output goes to stderr so command output on stdout stays clean.
    Calling it again replaces the handlers it installed before.

    Args:
        log_level: Console level name (DEBUG, INFO, WARNING, ERROR, CRITICAL)
        log_file: Optional log file; it always records DEBUG and up
    """
    level = logging.getLevelName(log_level.upper())
    root = logging.getLogger()
    root.setLevel(logging.DEBUG if log_file else level)
    _drop_lab_handlers(root)

    console = logging.StreamHandler(sys.stderr)
    console.setLevel(level)
    console.setFormatter(ColoredFormatter(CONSOLE_FORMAT, datefmt=DATE_FORMAT))
    console._lab_handler = True
    root.addHandler(console)

    if log_file:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        to_file = logging.FileHandler(log_file, encoding='utf-8')
        to_file.setLevel(logging.DEBUG)
        to_file.setFormatter(logging.Formatter(FILE_FORMAT, datefmt=DATE_FORMAT))
        to_file._lab_handler = True
        root.addHandler(to_file)

    # Font discovery chatter
    logging.getLogger('matplotlib').setLevel(logging.WARNING)
    return root


def log_stage_action(logger: logging.Logger, stage: str, action: str, details: str = ""):
    """
    Log a training-stage event as `[STAGE:<stage>] action - details`.

    Args:
        logger: Logger instance
        stage: Stage or experiment name
        action: What happened
        details: Optional free text
    """
    message = f"[STAGE:{stage}] {action}"
    if details:
        message += f" - {details}"
    logger.info(message)


def log_command(logger: logging.Logger, command: str, details: str = ""):
    """Log a CLI command event."""
    message = f"[CMD:{command}]"
    if details:
        message += f" {details}"
    logger.info(message)


def log_error_with_context(logger: logging.Logger, error: Exception, context: Optional[dict] = None):
    """
    Log a failed command with its error class and context.

    The traceback is only recorded at DEBUG, so it reaches the log file but
    not a default console.

    Args:
        logger: Logger instance
        error: The exception being reported
        context: Extra key/value pairs, e.g. the command name
    """
    error_class = getattr(error, 'error_class', type(error).__name__)
    parts = [f"{error_class}: {error}"]
    if context:
        parts.append(" ".join(f"{key}={value}" for key, value in sorted(context.items())))
    logger.error(" | ".join(parts))
    logger.debug(f"traceback for {error_class}", exc_info=error)
