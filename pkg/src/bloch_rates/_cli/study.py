import sys

import click
from typing_extensions import Unpack

from bloch_rates._cli.json_output import emit_json, quiet_output
from bloch_rates._cli.options import (
    StudyOptionArgs,
    init_output,
    parse_config_options,
    study_options,
)
from bloch_rates._config.load import load_config
from bloch_rates._config.write import print_config_yaml
from bloch_rates._studies.output import StudyOutput
from bloch_rates._studies.run import run_study
from bloch_rates._types.experiment import StudyKind
from bloch_rates._util.console import (
    check_print,
    path,
    quantity,
    slope_text,
    study_print,
)
from bloch_rates._util.constants import EXIT_CHECKS_FAILED, RESULT_FILE

STUDY_HELP: dict[StudyKind, str] = {
    "simulate-bloch": "Integrate the Bloch equations at every eps",
    "simulate-rate": "Integrate a rate equation at every eps",
    "rates": "Tabulate averaged, dominant and split rates with the scaling regime",
    "converge": "Measure the convergence order of a Bloch error channel",
    "average-oracle": "Check the averaged rates against finite time averages",
    "timelayer": "Detect the initial time layer of the non-polarized part",
    "equilibrium": "Compare long time populations with the kernel state",
    "dioph": "Run the small divisor scans and the genericity experiment",
}


def print_summary(output: StudyOutput, out: str | None) -> None:
    result = output.result
    for name, passed in result.checks.items():
        check_print(name, passed)
    for note in result.notes:
        study_print(note, format="info")
    if result.fit is not None:
        fit = result.fit
        study_print(
            slope_text(
                fit.slope, fit.stderr, fit.points, result.expected, result.tolerance
            ),
            format="info",
        )
    if out is not None:
        study_print("Wrote ", path(f"{out}/{RESULT_FILE}"), format="info")
    failed = sum(1 for passed in result.checks.values() if not passed)
    if failed:
        study_print(
            f"\n{result.study}: {quantity(failed, 'check')} failed", format="error"
        )
    else:
        study_print(f"\n{result.study}: all checks passed", format="success")


def study_command(kind: StudyKind) -> click.Command:
    """Build the click command that runs one study."""

    @click.command(kind, help=STUDY_HELP[kind])
    @study_options
    def command(
        config_file: str,
        output_json: bool,
        **kwargs: Unpack[StudyOptionArgs],
    ) -> None:
        init_output(**kwargs)
        options = parse_config_options(**kwargs)
        out = kwargs.get("out")
        with quiet_output(output_json):
            cfg = load_config(config_file, options)
            if kwargs.get("show_config"):
                print_config_yaml(cfg.model_copy(update={"experiment": kind}))
            output = run_study(cfg, kind, out)
            print_summary(output, out)
        if output_json:
            emit_json(output.result)
        if not output.passed:
            sys.exit(EXIT_CHECKS_FAILED)

    return command


study_commands = [study_command(kind) for kind in STUDY_HELP]
