from __future__ import annotations

from logging import getLogger
from pathlib import Path
from typing import Callable

from bloch_rates._config.write import write_config_file
from bloch_rates._studies.averaging import run_averaging_oracle
from bloch_rates._studies.convergence import run_convergence_study
from bloch_rates._studies.dioph import run_dioph_suite
from bloch_rates._studies.equilibrium import run_equilibrium_study
from bloch_rates._studies.output import StudyOutput, write_study
from bloch_rates._studies.simulate import run_rates, run_simulate_bloch, run_simulate_rate
from bloch_rates._studies.timelayer import run_timelayer_study
from bloch_rates._types.experiment import ExperimentConfig, StudyKind
from bloch_rates._util.error import StudyError

logger = getLogger(__name__)

STUDIES: dict[StudyKind, Callable[[ExperimentConfig], StudyOutput]] = {
    "simulate-bloch": run_simulate_bloch,
    "simulate-rate": run_simulate_rate,
    "rates": run_rates,
    "converge": run_convergence_study,
    "average-oracle": run_averaging_oracle,
    "timelayer": run_timelayer_study,
    "equilibrium": run_equilibrium_study,
    "dioph": run_dioph_suite,
}


def run_study(
    cfg: ExperimentConfig,
    study: StudyKind | None = None,
    out_dir: str | Path | None = None,
) -> StudyOutput:
    """Run the selected study and, when ``out_dir`` is given, write its artifacts.

    Raises:
        StudyError: If neither ``study`` nor ``cfg.experiment`` selects a study.
    """
    kind = study or cfg.experiment
    if kind is None:
        raise StudyError("no study selected: set 'experiment' in the config.")
    cfg = cfg.model_copy(update={"experiment": kind})
    logger.info(f"running {kind} over {len(cfg.scaling.eps)} eps values")
    output = STUDIES[kind](cfg)
    if out_dir is not None:
        write_study(output, out_dir)
        write_config_file(cfg, out_dir)
    return output
