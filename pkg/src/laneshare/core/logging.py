"""
Logging configuration for laneshare.

This module handles logging setup for CLI runs and experiment workers:
- Console handler on stderr at the configured level
- Optional file handler with path resolution
- Format customization
- Replacement of previously installed handlers

Library modules only create loggers under the "laneshare" hierarchy;
handlers are installed here, once per process.
"""

import logging
import os
from typing import List, Optional, Union

from ..config.models import LoggingConfig

LOG_LEVEL_ENV = "LANESHARE_LOG_LEVEL"


def resolve_level(config: LoggingConfig, override: Optional[str] = None) -> int:
    """Numeric level from an explicit override, the environment, or the config."""
    name = override or os.environ.get(LOG_LEVEL_ENV) or config.level
    level = getattr(logging, name.upper(), None)
    if not isinstance(level, int):
        raise ValueError(f"Unknown log level: {name}")
    return level


def setup_logging(config: LoggingConfig, level: Optional[str] = None) -> logging.Logger:
    """Configure and initialize logging system.

    Sets up:
    - File logging (if configured), relative paths resolved against the
      working directory
    - Console logging on stderr
    - A shared formatter built from the configured format string

    Existing root handlers are removed first so repeated calls (one per
    worker process in a comparison) do not duplicate output.

    Args:
        config: Logging configuration (level, format, optional file)
        level: Level name overriding both the environment and the config

    Returns:
        The "laneshare" logger
    """
    numeric_level = resolve_level(config, level)

    log_file = config.file
    if log_file and not os.path.isabs(log_file):
        log_file = os.path.join(os.getcwd(), log_file)

    handlers: List[Union[logging.FileHandler, logging.StreamHandler]] = []
    if log_file:
        file_handler = logging.FileHandler(log_file)
        file_handler.setLevel(numeric_level)
        handlers.append(file_handler)

    console_handler = logging.StreamHandler()
    console_handler.setLevel(numeric_level)
    handlers.append(console_handler)

    formatter = logging.Formatter(config.format)
    for handler in handlers:
        handler.setFormatter(formatter)

    root_logger = logging.getLogger()
    root_logger.setLevel(numeric_level)
    for existing in list(root_logger.handlers):
        root_logger.removeHandler(existing)
    for handler in handlers:
        root_logger.addHandler(handler)

    return logging.getLogger("laneshare")
