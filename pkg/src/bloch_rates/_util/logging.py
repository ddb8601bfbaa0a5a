import os
from logging import Logger, LoggerAdapter, getLevelName, getLogger
from typing import Any, MutableMapping

from rich.logging import RichHandler

from bloch_rates._util.console import console
from bloch_rates._util.constants import DEFAULT_LOG_LEVEL, ENV_PREFIX, PKG_NAME

_handler: RichHandler | None = None


def init_logging(log_level: str | None = None) -> None:
    """Route package logging through a rich handler at the given level.

    The level falls back to ``BLOCH_RATES_LOG_LEVEL`` and then to
    ``DEFAULT_LOG_LEVEL``. Calling again only updates the level.
    """
    global _handler
    log_level = (
        log_level or os.environ.get(f"{ENV_PREFIX}_LOG_LEVEL") or DEFAULT_LOG_LEVEL
    )
    level = getLevelName(log_level.upper())
    pkg_logger = getLogger(PKG_NAME)
    if _handler is None:
        _handler = RichHandler(
            console=console,
            show_path=False,
            markup=False,
            rich_tracebacks=False,
        )
        pkg_logger.addHandler(_handler)
        pkg_logger.propagate = False
    _handler.setLevel(level)
    pkg_logger.setLevel(level)


def reset_logging() -> None:
    global _handler
    if _handler is not None:
        getLogger(PKG_NAME).removeHandler(_handler)
        _handler = None
    getLogger(PKG_NAME).propagate = True


class PrefixLogger(LoggerAdapter):
    def __init__(self, logger: Logger, prefix: str) -> None:
        super().__init__(logger, {})
        self.prefix = prefix

    def process(
        self, msg: Any, kwargs: MutableMapping[str, Any]
    ) -> tuple[str, MutableMapping[str, Any]]:
        return f"[{self.prefix}] {msg}", kwargs
