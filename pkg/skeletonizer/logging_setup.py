"""Structured logging configuration with structlog bridge.

Provides the stdlib ``logging.Logger`` named ``skeletonizer`` with records
rendered through structlog processors. JSON output is toggled with
``TNS_JSON_LOGGING=1``; ``TNS_DEBUG`` lowers the level to DEBUG.

Inside :func:`run_context` every record also carries the bound sweep
coordinates (command, T, seed, ...), so a JSON log of a long sweep can be
split per temperature point afterwards.

Falls back to plain stdlib formatting if structlog is not installed.
"""

from __future__ import annotations

import contextlib
import logging
from collections.abc import Iterator

_TRUTHY = ("1", "true", "yes", "on")


def configure_logging(name: str = "skeletonizer") -> logging.Logger:
    """Set up and return the package logger.

    Records go to stderr. JSON mode writes one object per line with an ISO
    timestamp; console mode keeps a short clock time. Calling it again
    returns the already configured logger untouched.
    """
    logger = logging.getLogger(name)

    if logger.handlers:
        return logger

    from .settings import TnsSettings

    settings = TnsSettings()
    debug = settings.debug.strip().lower() in _TRUTHY
    json_mode = settings.json_logging.strip() == "1"

    try:
        import structlog

        shared_processors = [
            structlog.contextvars.merge_contextvars,
            structlog.stdlib.add_log_level,
            structlog.stdlib.add_logger_name,
            structlog.processors.TimeStamper(fmt="iso" if json_mode else "%H:%M:%S"),
            structlog.processors.StackInfoRenderer(),
            structlog.processors.format_exc_info,
            structlog.processors.UnicodeDecoder(),
        ]

        if json_mode:
            renderer = structlog.processors.JSONRenderer()
        else:
            renderer = structlog.dev.ConsoleRenderer(colors=False)  # type: ignore[assignment]

        formatter = structlog.stdlib.ProcessorFormatter(
            processors=[
                structlog.stdlib.ProcessorFormatter.remove_processors_meta,
                renderer,
            ],
            foreign_pre_chain=shared_processors,  # type: ignore[arg-type]
        )

        structlog.configure(
            processors=shared_processors  # type: ignore[arg-type]
            + [
                structlog.stdlib.ProcessorFormatter.wrap_for_formatter,
            ],
            logger_factory=structlog.stdlib.LoggerFactory(),
            wrapper_class=structlog.stdlib.BoundLogger,
            cache_logger_on_first_use=True,
        )

    except ImportError:
        formatter = logging.Formatter("%(asctime)s %(levelname)s %(message)s", datefmt="%H:%M:%S")  # type: ignore[assignment]

    handler = logging.StreamHandler()
    handler.setFormatter(formatter)
    logger.addHandler(handler)
    logger.setLevel(logging.DEBUG if debug else logging.INFO)
    return logger


@contextlib.contextmanager
def run_context(**fields: object) -> Iterator[None]:
    """Bind sweep coordinates to every record logged inside the block.

    None values are dropped. Bindings nest: an inner block adds to the
    outer one and restores it on exit. Without structlog this is a no-op.
    """
    try:
        from structlog.contextvars import bound_contextvars
    except ImportError:
        yield
        return

    with bound_contextvars(**{k: v for k, v in fields.items() if v is not None}):
        yield
