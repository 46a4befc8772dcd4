"""
Logging Configuration - Setup structured logging
"""
import logging
import os
import sys
from logging.handlers import RotatingFileHandler
from typing import Optional

import orjson

# Attributes every LogRecord has; anything else came in through ``extra=``
_RESERVED = frozenset(vars(logging.LogRecord('', 0, '', 0, '', (), None))) | {'message', 'asctime'}


def record_extras(record: logging.LogRecord) -> dict:
    """Fields attached to a record through ``extra={...}``"""
    return {
        key: value for key, value in vars(record).items()
        if key not in _RESERVED and not key.startswith('_')
    }


class StructuredFormatter(logging.Formatter):
    """
    Formatter that keeps the ``extra`` context of a record

    Text mode appends ``key=value`` pairs after the message, json mode emits
    one orjson object per line.

    Examples:
        >>> logger.info("epoch done", extra={'epoch': 3, 'dev_loss': 0.12})
        2026-01-01 10:00:00 - app.services.training_service - INFO - epoch done epoch=3 dev_loss=0.12
    """

    def __init__(self, fmt: str = "text", **kwargs):
        super().__init__(
            fmt='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
            datefmt='%Y-%m-%d %H:%M:%S',
            **kwargs
        )
        self.mode = fmt

    def format(self, record: logging.LogRecord) -> str:
        extras = record_extras(record)

        if self.mode == "json":
            payload = {
                'time': self.formatTime(record, self.datefmt),
                'logger': record.name,
                'level': record.levelname,
                'message': record.getMessage(),
            }
            payload.update(extras)
            if record.exc_info:
                payload['exc_info'] = self.formatException(record.exc_info)
            return orjson.dumps(payload, default=str, option=orjson.OPT_SERIALIZE_NUMPY).decode('utf-8')

        message = super().format(record)
        if extras:
            message += " " + " ".join(f"{key}={value}" for key, value in extras.items())
        return message


def setup_logging(
    level: str = "INFO",
    log_file: Optional[str] = None,
    fmt: str = "text",
    max_bytes: int = 10 * 1024 * 1024,  # 10MB
    backup_count: int = 5,
    stream=None
):
    """
    Setup application logging

    Args:
        level: Log level (DEBUG, INFO, WARNING, ERROR, CRITICAL)
        log_file: Path to log file (None = console only)
        fmt: "text" (key=value extras) or "json" (one object per line)
        max_bytes: Max size of log file before rotation
        backup_count: Number of backup files to keep
        stream: Console stream (default stderr, so stdout stays clean for JSONL output)

    Examples:
        >>> setup_logging(level="DEBUG", log_file="logs/kws.log")
        >>> # Logs to both console and file
    """
    numeric_level = getattr(logging, level.upper(), logging.INFO)

    formatter = StructuredFormatter(fmt=fmt)

    root_logger = logging.getLogger()
    root_logger.setLevel(numeric_level)
    root_logger.handlers.clear()

    console_handler = logging.StreamHandler(stream or sys.stderr)
    console_handler.setLevel(numeric_level)
    console_handler.setFormatter(formatter)
    root_logger.addHandler(console_handler)

    if log_file:
        try:
            directory = os.path.dirname(log_file)
            if directory:
                os.makedirs(directory, exist_ok=True)

            file_handler = RotatingFileHandler(
                log_file,
                maxBytes=max_bytes,
                backupCount=backup_count
            )
            file_handler.setLevel(numeric_level)
            file_handler.setFormatter(formatter)
            root_logger.addHandler(file_handler)

            root_logger.debug("Logging to file", extra={'log_file': log_file})

        except OSError as e:
            root_logger.error(f"Failed to setup file logging: {e}")

    # Silence noisy loggers
    logging.getLogger('numba').setLevel(logging.WARNING)
    logging.getLogger('matplotlib').setLevel(logging.WARNING)

    root_logger.debug("Logging configured", extra={'level': level, 'format': fmt})
