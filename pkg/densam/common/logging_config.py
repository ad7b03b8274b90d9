"""
Logging Configuration for densam
Provides consistent logging setup for the library and the batch CLI
"""

import logging
import os
import sys
from typing import Optional

import colorlog

# stdout carries command results, so log records always go to stderr
LOG_FORMAT = "%(asctime)s - %(name)s - [%(levelname)s] - {service} - %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"

LOG_COLORS = {
    "DEBUG": "cyan",
    "INFO": "green",
    "WARNING": "yellow",
    "ERROR": "red",
    "CRITICAL": "bold_red",
}


def _build_formatter(service_name: str, log_format: Optional[str], stream) -> logging.Formatter:
    fmt = log_format or LOG_FORMAT.format(service=service_name)
    if hasattr(stream, "isatty") and stream.isatty():
        return colorlog.ColoredFormatter("%(log_color)s" + fmt, datefmt=DATE_FORMAT, log_colors=LOG_COLORS)
    return logging.Formatter(fmt, datefmt=DATE_FORMAT)


def setup_logging(service_name: str, level: Optional[str] = None, log_format: Optional[str] = None) -> logging.Logger:
    """
    Setup logging for a densam entry point

    Args:
        service_name: Name of the command or job (used in log messages)
        level: Log level (defaults to env LOG_LEVEL or 'INFO')
        log_format: Custom log format (optional)

    Returns:
        Configured logger instance
    """
    level = level or os.getenv("LOG_LEVEL", "INFO")
    log_level = getattr(logging, level.upper(), logging.INFO)

    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(_build_formatter(service_name, log_format, sys.stderr))

    root = logging.getLogger()
    for existing in list(root.handlers):
        root.removeHandler(existing)
    root.addHandler(handler)
    root.setLevel(log_level)

    logger = logging.getLogger(service_name)
    logger.setLevel(log_level)

    logger.info(f"{service_name} logging initialized at {level} level")

    return logger
