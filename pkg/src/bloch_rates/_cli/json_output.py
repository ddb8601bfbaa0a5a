import sys
from collections.abc import Iterator
from contextlib import contextmanager, redirect_stdout

import click

from bloch_rates._types.results import StudyResult
from bloch_rates._util.console import console
from bloch_rates._util.io import dumps_json
from bloch_rates._util.pydantic_util import model_dump


@contextmanager
def quiet_output(output_json: bool) -> Iterator[None]:
    """Keep stdout free for the JSON document.

    The rich console is muted and anything a study prints to stdout is sent
    to stderr instead.
    """
    if not output_json:
        yield
        return
    was_quiet, console.quiet = console.quiet, True
    try:
        with redirect_stdout(sys.stderr):
            yield
    finally:
        console.quiet = was_quiet


def emit_json(result: StudyResult) -> None:
    # same bytes as the result.json written with --out
    click.echo(dumps_json(model_dump(result)), nl=False)
