"""
Logging utility - Structured logging for the hotspot detection toolkit
"""

import logging
import os
import sys
from typing import Dict, List, Optional


LOG_LEVEL_ENV = "HOTSPOT_LOG_LEVEL"

# Global logger configuration
_loggers: Dict[str, logging.Logger] = {}
_file_handlers: List[logging.Handler] = []
_log_level = logging.getLevelName(os.environ.get(LOG_LEVEL_ENV, "INFO").upper())
if not isinstance(_log_level, int):
    _log_level = logging.INFO


def setup_logger(name: str, level: Optional[int] = None) -> logging.Logger:
    """
    Setup and return a logger instance.

    Args:
        name: Logger name (typically __name__)
        level: Optional logging level override

    Returns:
        Configured logger instance
    """
    if name in _loggers:
        return _loggers[name]

    logger = logging.getLogger(name)
    logger.setLevel(level or _log_level)

    # Avoid duplicate handlers
    if not logger.handlers:
        # stderr keeps stdout free for the summary rows the CLI prints
        handler = logging.StreamHandler(sys.stderr)
        handler.setLevel(level or _log_level)

        # Format: timestamp - name - level - message
        formatter = logging.Formatter(
            '%(asctime)s - %(name)-36s - %(levelname)-8s - %(message)s',
            datefmt='%Y-%m-%d %H:%M:%S'
        )
        handler.setFormatter(formatter)
        logger.addHandler(handler)

    for file_handler in _file_handlers:
        logger.addHandler(file_handler)

    logger.propagate = False

    _loggers[name] = logger
    return logger


def attach_file_handler(path: str) -> logging.Handler:
    """
    Mirror every cached logger into a run log file.

    Loggers created afterwards pick the handler up as well.

    Args:
        path: Destination log file (appended to)

    Returns:
        The attached handler, to be passed to detach_file_handler
    """
    handler = logging.FileHandler(path, encoding="utf-8")
    handler.setLevel(logging.DEBUG)
    handler.setFormatter(logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(threadName)s - %(message)s',
        datefmt='%Y-%m-%dT%H:%M:%S'
    ))
    _file_handlers.append(handler)
    for logger in _loggers.values():
        logger.addHandler(handler)
    return handler


def detach_file_handler(handler: logging.Handler) -> None:
    """Remove a handler added by attach_file_handler and close it."""
    if handler in _file_handlers:
        _file_handlers.remove(handler)
    for logger in _loggers.values():
        if handler in logger.handlers:
            logger.removeHandler(handler)
    handler.close()


def set_log_level(level: int) -> None:
    """
    Set global log level for all loggers.

    Args:
        level: Logging level (logging.DEBUG, INFO, WARNING, ERROR)
    """
    global _log_level
    _log_level = level

    for logger in _loggers.values():
        logger.setLevel(level)
        for handler in logger.handlers:
            if handler not in _file_handlers:
                handler.setLevel(level)
