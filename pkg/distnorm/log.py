"""Structured logging setup. Reports go to stdout, log events to stderr."""

from __future__ import annotations

import logging
import os
import sys
from typing import Optional

import structlog

_LEVELS = {
    "DEBUG": logging.DEBUG,
    "INFO": logging.INFO,
    "WARNING": logging.WARNING,
    "ERROR": logging.ERROR,
}


def configure_logging(level: Optional[str] = None, json_logs: bool = False) -> None:
    name = (level or os.environ.get("DISTNORM_LOG_LEVEL") or "WARNING").upper()
    threshold = _LEVELS.get(name, logging.WARNING)
    renderer = (
        structlog.processors.JSONRenderer(sort_keys=True)
        if json_logs
        else structlog.dev.ConsoleRenderer(colors=False)
    )
    structlog.configure(
        processors=[
            structlog.contextvars.merge_contextvars,
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            renderer,
        ],
        wrapper_class=structlog.make_filtering_bound_logger(threshold),
        logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
        cache_logger_on_first_use=False,
    )
