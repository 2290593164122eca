import logging

from rich.console import Console
from rich.logging import RichHandler

from app.core.config import settings


def configure_logging(level: str | None = None) -> None:
    """Route library logs to stderr through rich; stdout stays free for results."""
    handler = RichHandler(
        console=Console(stderr=True),
        show_path=False,
        rich_tracebacks=False,
    )
    logging.basicConfig(
        level=(level or settings.LOG_LEVEL).upper(),
        format="%(name)s: %(message)s",
        datefmt="[%X]",
        handlers=[handler],
        force=True,
    )
