from collections.abc import Callable
from typing import Any, TypeVar

import click
from typing_extensions import TypedDict, Unpack

from bloch_rates._config.load import ConfigOptions
from bloch_rates._util.constants import ALL_LOG_LEVELS, DEFAULT_LOG_LEVEL
from bloch_rates._util.logging import init_logging

F = TypeVar("F", bound=Callable[..., Any])

MAX_SEED = 2**64 - 1


def output_options(f: F) -> F:
    f = click.option(
        "--log-level",
        type=click.Choice(
            [level.lower() for level in ALL_LOG_LEVELS],
            case_sensitive=False,
        ),
        default=DEFAULT_LOG_LEVEL,
        envvar="BLOCH_RATES_LOG_LEVEL",
        help=f"Set the log level (defaults to `'{DEFAULT_LOG_LEVEL}'`).",
    )(f)
    return f


def json_option(f: F) -> F:
    """Decorator that adds a ``--json`` flag for machine-readable output."""
    return click.option(
        "--json",
        "output_json",
        is_flag=True,
        default=False,
        help="Print result.json to stdout.",
    )(f)


def study_options(f: F) -> F:
    """Options shared by every study command."""
    f = output_options(f)
    f = json_option(f)
    f = click.option(
        "--config",
        "config_file",
        type=click.Path(
            exists=True,
            file_okay=True,
            dir_okay=False,
            readable=True,
            resolve_path=True,
        ),
        required=True,
        envvar="BLOCH_RATES_CONFIG",
        help="YAML experiment file.",
    )(f)
    f = click.option(
        "--out",
        type=click.Path(
            file_okay=False,
            dir_okay=True,
            writable=True,
            resolve_path=False,
        ),
        default=None,
        envvar="BLOCH_RATES_OUT",
        help="Directory for result.json and the CSV tables. Nothing is written when omitted.",
    )(f)
    f = click.option(
        "--seed",
        type=click.IntRange(0, MAX_SEED),
        default=None,
        envvar="BLOCH_RATES_SEED",
        help="Seed for every random draw. Overrides `seed` in the config.",
    )(f)
    f = click.option(
        "--jobs",
        type=click.IntRange(min=1),
        default=None,
        envvar="BLOCH_RATES_JOBS",
        help="Number of worker processes for the eps sweep. Overrides `jobs` in the config.",
    )(f)
    f = click.option(
        "--set",
        "-s",
        multiple=True,
        type=str,
        envvar="BLOCH_RATES_SET",
        help="""
    Override any field in the experiment config using dot notation (e.g. `field.subfield=value`).

    Examples:
      `--set scaling.mu=0.25`
      `--set scaling.eps=[0.1,0.05,0.025]`
      `--set scaling.eps.0=0.2`

    Values are parsed as JSON when possible (lists and dicts), otherwise as strings.
    String values are appended to existing lists; JSON lists and dicts replace existing values.
    When the same key is provided multiple times, later values override earlier ones.
    """,
    )(f)
    f = click.option(
        "--show-config",
        type=bool,
        is_flag=True,
        default=False,
        help="Print the resolved configuration as YAML before running.",
    )(f)
    return f


class OutputOptionArgs(TypedDict, total=False):
    log_level: str


class StudyOptionArgs(OutputOptionArgs, total=False):
    out: str | None
    seed: int | None
    jobs: int | None
    set: list[str] | None
    show_config: bool


def init_output(**kwargs: Unpack[OutputOptionArgs]) -> None:
    log_level = kwargs.get("log_level", DEFAULT_LOG_LEVEL)
    init_logging(log_level)


def parse_config_options(**kwargs: Unpack[StudyOptionArgs]) -> ConfigOptions:
    return ConfigOptions(
        overrides=list(kwargs.get("set") or []),  # set may be a tuple
        seed=kwargs.get("seed"),
        jobs=kwargs.get("jobs"),
    )
