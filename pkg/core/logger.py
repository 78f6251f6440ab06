import logging

from rich.console import Console
from rich.logging import RichHandler

from core.settings import get_settings

ROOT_LOGGER = "uniprot"

_configured = False


def _configure() -> logging.Logger:
    global _configured
    root = logging.getLogger(ROOT_LOGGER)
    if not _configured:
        handler = RichHandler(console=Console(stderr=True), show_path=False, rich_tracebacks=True)
        handler.setFormatter(logging.Formatter("%(name)s: %(message)s"))
        root.addHandler(handler)
        root.setLevel(get_settings().log_level.upper())
        root.propagate = False
        _configured = True
    return root


def get_logger(name: str) -> logging.Logger:
    """Return a child of the package logger, installing the rich handler on first use."""
    return _configure().getChild(name)


def set_level(level: str) -> None:
    _configure().setLevel(level.upper())
