"""
structlog on top of the standard library root logger.
"""
from logging.handlers import RotatingFileHandler
import logging
import sys

import structlog

from config import LoggingConfig


def configure_logging(cfg: LoggingConfig) -> None:
    level = getattr(logging, cfg.level.upper(), None)
    if not isinstance(level, int):
        level = logging.INFO

    handlers: list = [logging.StreamHandler(sys.stderr)]
    if cfg.file_path:
        handlers.append(RotatingFileHandler(cfg.file_path, maxBytes=cfg.max_file_size, backupCount=cfg.backup_count))
    logging.basicConfig(level=level, format=cfg.format, handlers=handlers, force=True)
    # tornado's access log is noisy below WARNING
    logging.getLogger("tornado.access").setLevel(max(level, logging.WARNING))

    renderer = structlog.processors.JSONRenderer() if cfg.json else structlog.dev.ConsoleRenderer(colors=False)
    structlog.configure(
        processors=[
            structlog.stdlib.filter_by_level,
            structlog.stdlib.add_logger_name,
            structlog.stdlib.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.processors.StackInfoRenderer(),
            structlog.processors.format_exc_info,
            renderer,
        ],
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )
