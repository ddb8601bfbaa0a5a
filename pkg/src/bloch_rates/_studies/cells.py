from __future__ import annotations

from dataclasses import dataclass
from logging import Logger

from bloch_rates._model.scaling import Scaling
from bloch_rates._types.experiment import ExperimentConfig
from bloch_rates._util.error import StudyError
from bloch_rates._util.logging import PrefixLogger


@dataclass(frozen=True)
class EpsCell:
    """One independent unit of a sweep: the config at a single eps."""

    cfg: ExperimentConfig
    eps: float

    @property
    def scaling(self) -> Scaling:
        return Scaling(eps=self.eps, mu=self.cfg.scaling.mu, p=self.cfg.scaling.p)

    def logger(self, logger: Logger) -> PrefixLogger:
        return PrefixLogger(logger, f"eps={self.eps:g}")


def eps_cells(cfg: ExperimentConfig, minimum: int = 1) -> list[EpsCell]:
    grid = cfg.scaling.eps
    if len(grid) < minimum:
        raise StudyError(
            f"{cfg.experiment or 'study'} needs at least {minimum} eps values, got {len(grid)}."
        )
    return [EpsCell(cfg=cfg, eps=eps) for eps in grid]
