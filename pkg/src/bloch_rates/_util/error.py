import sys
from types import TracebackType
from typing import Callable

import click
from rich.traceback import install

from bloch_rates._util.console import study_print


class BlochRatesError(Exception):
    """Base class for errors raised by bloch_rates with a user facing message."""

    pass


class HandledError(Exception):
    """Wrapper for exceptions that have already been printed to the console."""

    pass


class PropertyPError(BlochRatesError, ValueError):
    """A rate table has A(n,m) != 0 while A(m,n) == 0."""

    pass


class KernelError(BlochRatesError, ValueError):
    """Kernel extraction failed (wrong dimension or unstable rank)."""

    pass


class RegimeError(BlochRatesError, ValueError):
    """An operation was called outside the scaling regime it is defined for."""

    pass


class IntegrationError(BlochRatesError, RuntimeError):
    """Time integration produced a non-finite state or could not take a step."""

    def __init__(self, message: str, time: float) -> None:
        super().__init__(f"{message} (t={time:.6g})")
        self.time = time


class NoLayerError(BlochRatesError, RuntimeError):
    """No decaying segment was found in a non-polarized norm series."""

    pass


class TruncationError(BlochRatesError, RuntimeError):
    """No truncation level below the hard cap meets the tolerances."""

    pass


class StudyError(BlochRatesError, ValueError):
    """The study configuration cannot produce the requested result."""

    pass


def exception_hook() -> Callable[..., None]:
    sys_handler = sys.excepthook

    def handler(
        exception_type: type[BaseException],
        exception: BaseException,
        traceback: TracebackType,
    ) -> None:
        if isinstance(exception, HandledError):
            # Exception already handled, do not print again
            sys.exit(1)
        elif isinstance(exception, BlochRatesError):
            study_print(str(exception), format="error")
            sys.exit(1)
        elif isinstance(exception, KeyboardInterrupt):
            # Exit cleanly without traceback (130 = 128 + SIGINT)
            sys.exit(130)
        elif isinstance(exception, click.Abort):
            sys.exit(1)
        else:
            sys_handler(exception_type, exception, traceback)

    return handler


_exception_hook_set: bool = False


def set_exception_hook(force: bool = False) -> None:
    global _exception_hook_set
    if not _exception_hook_set or force:
        install(show_locals=False, suppress=[click])
        sys.excepthook = exception_hook()
        _exception_hook_set = True
