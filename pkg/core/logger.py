import logging

import structlog

from core.config import settings


def configure_logging(level: str | None = None, json: bool | None = None) -> None:
    """Configure structlog once for the whole process."""
    level_name = (level or settings.log_level).upper()
    use_json = settings.log_json if json is None else json

    renderer = structlog.processors.JSONRenderer() if use_json else structlog.dev.ConsoleRenderer()
    structlog.configure(
        processors=[
            structlog.contextvars.merge_contextvars,
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            renderer,
        ],
        wrapper_class=structlog.make_filtering_bound_logger(
            logging._nameToLevel.get(level_name, logging.INFO)),
        cache_logger_on_first_use=False,
    )


def get_logger(name: str) -> structlog.stdlib.BoundLogger:
    return structlog.get_logger(name)
