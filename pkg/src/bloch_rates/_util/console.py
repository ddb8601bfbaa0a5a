from __future__ import annotations

from typing import Any, Literal

from rich.console import Console
from rich.text import Text

console = Console(stderr=True)

Formats = Literal["default", "success", "info", "warning", "error"]

_PREFIXES: dict[Formats, tuple[str, str]] = {
    "success": ("✓", "green"),
    "info": ("ℹ", "blue"),
    "warning": ("⚠", "yellow"),
    "error": ("✗", "red"),
}


def format_prefix(format: Formats) -> Text:
    if format not in _PREFIXES:
        return Text("")
    symbol, style = _PREFIXES[format]
    return Text(symbol, style=style)


def study_print(*objects: Any, format: Formats = "default", **kwargs: Any) -> None:
    """Print to stderr with a status symbol in front.

    Leading newlines of a string first argument are printed before the symbol
    so blank separator lines stay unprefixed.
    """
    prefix = format_prefix(format)
    if prefix and objects and isinstance(objects[0], str):
        head = objects[0]
        body = head.lstrip("\n")
        if body != head:
            console.print(head[: len(head) - len(body)], end="")
        objects = (prefix, body, *objects[1:])
    elif prefix:
        objects = (prefix, *objects)
    console.print(*objects, **kwargs)


def check_print(name: str, passed: bool) -> None:
    study_print(name, format="success" if passed else "error")


def slope_text(
    slope: float,
    stderr: float,
    points: int,
    expected: float | None = None,
    tolerance: float | None = None,
) -> Text:
    """Fitted log-log slope, followed by the accepted band when there is one."""
    text = Text(f"slope {slope:.4f} ± {stderr:.4f} over {quantity(points, 'point')}")
    if expected is not None and tolerance is not None:
        text.append(f" (expected {expected:.4f} ± {tolerance:.4f})", style="dim")
    return text


def path(p: str) -> Text:
    return Text(p, style="magenta")


def quantity(count: int, units: str, plural: str | None = None) -> str:
    word = units if count == 1 else (plural or units + "s")
    return f"{count} {word}"
