"""Logging configuration shared by the CLI and scripts."""
import logging
import sys
from typing import Union

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def configure_logging(level: Union[str, int] = "INFO") -> None:
    """
    Install a single stderr handler on the root logger.

    Calling it again replaces the previous handler instead of stacking a second one.

    Args:
        level: Logging level name or number
    """
    root = logging.getLogger()
    for handler in list(root.handlers):
        if getattr(handler, "_imsvd_handler", False):
            root.removeHandler(handler)

    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    handler._imsvd_handler = True  # type: ignore[attr-defined]
    root.addHandler(handler)
    root.setLevel(level.upper() if isinstance(level, str) else level)
