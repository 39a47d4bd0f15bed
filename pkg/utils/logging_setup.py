"""
This module sets up a standardized logging configuration for SARR-LOC.
It defines a get_logger function used across the core, adapters, CLI and scripts to create loggers
with a console handler and an optional file handler under the log directory.

Level and directory come from the environment (LOG_LEVEL, LOG_DIR) so batch runs can be quietened
without touching code.
"""

import logging
import os
import sys
from pathlib import Path
from typing import Optional, Union

from dotenv import load_dotenv
load_dotenv()

LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")
LOG_DIR = os.getenv("LOG_DIR", "logs")


def get_logger(name: str, log_file: Optional[str] = None, level: Union[int, str, None] = None):
    """
    Returns a logger with console + optional file handler.

    Args:
        name: Logger name (usually __name__)
        log_file: Optional filename in the log dir (e.g., "core.log")
        level: Logging level; defaults to LOG_LEVEL from the environment
    """
    logger = logging.getLogger(name)

    # Avoid adding duplicate handlers if called multiple times
    if logger.hasHandlers():
        return logger

    level = level if level is not None else LOG_LEVEL
    logger.setLevel(level)
    formatter = logging.Formatter(
        "%(asctime)s | %(levelname)-8s | %(name)s | %(message)s",
        datefmt='%Y-%m-%d %H:%M:%S'
    )

    console_handler = logging.StreamHandler(sys.stdout)
    console_handler.setLevel(level)
    console_handler.setFormatter(formatter)
    logger.addHandler(console_handler)

    if log_file:
        log_dir = Path(LOG_DIR)
        log_dir.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(log_dir / log_file, mode='a')
        file_handler.setLevel(level)
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)

    return logger
