"""Conservation and coherence diagnostics of Bloch trajectories."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from pydantic import BaseModel, ConfigDict

from bloch_rates._bloch.solver import BlochTrajectory
from bloch_rates._util.io import write_csv


class ConservationReport(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    trace_drift: float
    hermiticity_residual: float
    positivity_violation: float

    def passed(self, tolerance: float = 1e-8) -> bool:
        return (
            self.trace_drift <= tolerance
            and self.hermiticity_residual <= tolerance
            and self.positivity_violation <= tolerance
        )


def _require_nonempty(traj: BlochTrajectory) -> None:
    if len(traj) == 0:
        raise ValueError("trajectory has no snapshots.")


def conservation_diagnostics(traj: BlochTrajectory) -> ConservationReport:
    """Worst trace drift, hermiticity residual and negative population over a run."""
    _require_nonempty(traj)
    return ConservationReport(
        trace_drift=float(np.max(np.abs(traj.trace - traj.trace[0]))),
        hermiticity_residual=float(np.max(traj.hermiticity_residual)),
        positivity_violation=float(max(0.0, -np.min(traj.min_population))),
    )


def coherence_norm_series(traj: BlochTrajectory) -> list[tuple[float, float]]:
    _require_nonempty(traj)
    return [(float(t), float(c)) for t, c in zip(traj.times, traj.coherence_l1)]


def trajectory_rows(traj: BlochTrajectory) -> tuple[list[str], list[list[float]]]:
    header = (
        ["t"]
        + [f"rho_{n + 1}" for n in range(traj.N)]
        + ["coherence_l1", "trace", "herm_residual"]
    )
    populations = traj.populations()
    rows = [
        [float(traj.times[i])]
        + [float(x) for x in populations[i]]
        + [
            float(traj.coherence_l1[i]),
            float(np.real(traj.trace[i])),
            float(traj.hermiticity_residual[i]),
        ]
        for i in range(len(traj))
    ]
    return header, rows


def write_trajectory_csv(traj: BlochTrajectory, path: str | Path) -> Path:
    header, rows = trajectory_rows(traj)
    return write_csv(path, header, rows)
