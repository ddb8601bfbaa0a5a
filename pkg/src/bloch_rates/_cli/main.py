import sys

import click
from dotenv import find_dotenv, load_dotenv

from bloch_rates._cli.study import study_commands
from bloch_rates._util.console import study_print
from bloch_rates._util.constants import ENV_PREFIX
from bloch_rates._util.error import set_exception_hook

from .. import __version__


class StudyGroup(click.Group):
    """Lists studies in pipeline order (simulation first, diagnostics last)."""

    def list_commands(self, ctx: click.Context) -> list[str]:
        return list(self.commands)


@click.group(
    cls=StudyGroup,
    invoke_without_command=True,
    context_settings={"max_content_width": 120},
)
@click.option(
    "--version",
    is_flag=True,
    default=False,
    help="Print the bloch_rates version.",
)
@click.pass_context
def bloch_rates(ctx: click.Context, version: bool) -> None:
    if ctx.invoked_subcommand is not None:
        return
    click.echo(__version__ if version else ctx.get_help())
    ctx.exit()


for command in study_commands:
    bloch_rates.add_command(command)


def _print_usage_error(e: click.UsageError) -> None:
    ctx = e.ctx
    if ctx is None:
        return
    study_print("")
    study_print(ctx.get_usage())
    if ctx.command.get_help_option(ctx) is not None:
        study_print(f"Try '{ctx.command_path} {ctx.help_option_names[0]}' for help.")


def main() -> None:  # pragma: no cover
    set_exception_hook()
    load_dotenv(find_dotenv(usecwd=True))
    try:
        bloch_rates(auto_envvar_prefix=ENV_PREFIX, standalone_mode=False)
    except click.ClickException as e:
        if isinstance(e, click.UsageError):
            _print_usage_error(e)
        study_print("\n[red]Error:[/red]", e.format_message(), format="error")
        sys.exit(e.exit_code)


if __name__ == "__main__":
    main()
