"""
Logging helpers for PVBat-Sizer.

Library modules only call ``logging.getLogger(__name__)``; the entry points call
:func:`setup_logging` once.
"""

import os
import logging
from typing import Optional

from dotenv import load_dotenv

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
LOG_LEVEL_ENV = 'PVBAT_LOG_LEVEL'


def resolve_log_level(level: Optional[str] = None) -> int:
    """
    Resolve the effective log level.

    Args:
        level (str, optional): Explicit level name such as ``"DEBUG"``. When omitted the
            ``PVBAT_LOG_LEVEL`` environment variable (or a ``.env`` file) is consulted.

    Returns:
        int: A ``logging`` level constant, ``logging.INFO`` if nothing is set.
    """
    if level is None:
        load_dotenv()
        level = os.environ.get(LOG_LEVEL_ENV, 'INFO')
    resolved = logging.getLevelName(str(level).upper())
    return resolved if isinstance(resolved, int) else logging.INFO


def setup_logging(level: Optional[str] = None, log_file: Optional[str] = None) -> None:
    """
    Configure the root logger with a stderr handler and an optional log file.

    Args:
        level (str, optional): Log level name. Defaults to the environment setting.
        log_file (str, optional): Path of a log file to append to.
    """
    handlers = [logging.StreamHandler()]
    if log_file:
        log_dir = os.path.dirname(os.path.abspath(log_file))
        os.makedirs(log_dir, exist_ok=True)
        handlers.append(logging.FileHandler(log_file))

    logging.basicConfig(
        level=resolve_log_level(level),
        format=LOG_FORMAT,
        handlers=handlers,
        force=True
    )
    # cvxpy is chatty at INFO
    logging.getLogger('__cvxpy__').setLevel(logging.WARNING)
