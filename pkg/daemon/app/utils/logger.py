"""Logging utilities.

``log`` keeps the one-call facade used throughout the package and routes
it through the standard ``logging`` module so that the level and the
destination can be configured once by the CLI.
"""

from __future__ import annotations

import logging
import sys

from app.core.config import settings

LOGGER_NAME = "awdl"

_logger = logging.getLogger(LOGGER_NAME)


def configure_logging(level: str | None = None) -> None:
    """Attach a timestamped stderr handler to the package logger.

    Args:
        level: Level name; defaults to ``settings.LOG_LEVEL``.
    """
    if not _logger.handlers:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter("[%(asctime)s] %(levelname)s %(message)s"))
        _logger.addHandler(handler)
    _logger.setLevel((level or settings.LOG_LEVEL).upper())


def log(message: str, level: int = logging.INFO) -> None:
    """Emit a log message.

    Args:
        message: The message to log.
        level: Standard ``logging`` level.
    """
    _logger.log(level, message)


def warn(message: str) -> None:
    log(message, logging.WARNING)


def debug(message: str) -> None:
    log(message, logging.DEBUG)
