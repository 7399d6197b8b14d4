"""
Centralized logging utilities for comprestore.

Provides a configured logger with rotating file handler and optional console output.
Configuration via environment variables:
- COMPRESTORE_LOG_DIR: directory for log files (default: ./logs)
- COMPRESTORE_LOG_LEVEL: logging level (DEBUG, INFO, WARNING, ERROR, CRITICAL). Default: INFO
- COMPRESTORE_LOG_TO_CONSOLE: '1' to enable console logging (default: '1')

USAGE:
get_logger("comprestore.train").info("epoch %d done", 3)
# Creates ./logs/comprestore.log
"""

import logging
import os
from pathlib import Path
from logging.handlers import RotatingFileHandler


_LOGGER_CACHE = {}
LOG_FILENAME = "comprestore.log"
# Set from config.json `logging_level`; COMPRESTORE_LOG_LEVEL still wins.
_DEFAULT_LEVEL = "INFO"


def _ensure_log_dir() -> Path:
    default_dir = Path.cwd() / "logs"
    log_dir = Path(os.environ.get("COMPRESTORE_LOG_DIR", str(default_dir)))
    log_dir.mkdir(parents=True, exist_ok=True)
    return log_dir


def _resolve_level() -> int:
    level_name = os.environ.get("COMPRESTORE_LOG_LEVEL", _DEFAULT_LEVEL).upper()
    return getattr(logging, level_name, logging.INFO)


def set_default_level(level: str) -> None:
    """Level used when COMPRESTORE_LOG_LEVEL is unset; existing loggers are updated in place."""
    global _DEFAULT_LEVEL
    _DEFAULT_LEVEL = level.upper()
    resolved = _resolve_level()
    for logger in _LOGGER_CACHE.values():
        logger.setLevel(resolved)
        for h in logger.handlers:
            h.setLevel(resolved)


def get_logger(name: str) -> logging.Logger:
    if name in _LOGGER_CACHE:
        logger = _LOGGER_CACHE[name]
        # Reconfigure if env changed (e.g., different log dir or level)
        desired_file = _ensure_log_dir() / LOG_FILENAME
        desired_level = _resolve_level()

        needs_reconfigure = False
        for h in list(logger.handlers):
            if isinstance(h, RotatingFileHandler):
                if Path(getattr(h, "baseFilename", "")) != desired_file:
                    needs_reconfigure = True
            h.setLevel(desired_level)
        if logger.level != desired_level:
            logger.setLevel(desired_level)

        if not needs_reconfigure:
            return logger
        for h in list(logger.handlers):
            try:
                h.close()
            except Exception:
                pass
            logger.removeHandler(h)

    logger = logging.getLogger(name)
    if logger.handlers and name not in _LOGGER_CACHE:
        # Already configured globally
        _LOGGER_CACHE[name] = logger
        return logger

    logger.setLevel(_resolve_level())

    # Rotating file handler: 5 MB per file, keep 5 backups
    file_handler = RotatingFileHandler(
        filename=str(_ensure_log_dir() / LOG_FILENAME),
        maxBytes=5 * 1024 * 1024,
        backupCount=5,
        encoding="utf-8",
    )
    file_handler.setFormatter(
        logging.Formatter(
            fmt="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
            datefmt="%Y-%m-%d %H:%M:%S",
        )
    )
    logger.addHandler(file_handler)

    if os.environ.get("COMPRESTORE_LOG_TO_CONSOLE", "1") == "1":
        console_handler = logging.StreamHandler()
        console_handler.setFormatter(logging.Formatter("%(message)s"))
        console_handler.setLevel(_resolve_level())
        logger.addHandler(console_handler)

    logger.propagate = False
    _LOGGER_CACHE[name] = logger
    return logger
