"""Averaging oracle: quadrature averages of the time dependent rate against the closed form."""

from __future__ import annotations

import math
from logging import getLogger
from typing import Any

import numpy as np

from bloch_rates._model.field import QuasiPeriodicField
from bloch_rates._model.system import LevelSystem
from bloch_rates._rates.psi import average_oracle, psi_averaged
from bloch_rates._studies.cells import EpsCell, eps_cells
from bloch_rates._studies.fit import MIN_FIT_POINTS, fit_loglog, within_band
from bloch_rates._studies.output import StudyOutput, build_result, table_from_rows
from bloch_rates._types.experiment import AverageOracleConfig, ExperimentConfig
from bloch_rates._types.results import SlopeFit
from bloch_rates._util.parallel import map_ordered

logger = getLogger(__name__)

EXPECTED_SLOPE = -1.0

_VANISHING_RESIDUAL = 1e-14


def snapped_windows(field: QuasiPeriodicField, cfg: AverageOracleConfig) -> list[float]:
    """The S grid, rounded to whole forcing periods for a single frequency field."""
    period = field.period() if cfg.snap_to_period else None
    if period is None:
        return list(cfg.S_grid)
    return [max(1, round(S / period)) * period for S in cfg.S_grid]


def quadrature_steps(
    system: LevelSystem, field: QuasiPeriodicField, S: float, points_per_period: int
) -> int:
    """Even Simpson step count resolving the fastest oscillation of the integrand."""
    modes = field.mode_frequencies()
    fastest = 2.0 * (float(np.max(np.abs(modes))) if modes.size else 0.0)
    fastest += float(np.max(np.abs(system.omega_diff()))) if system.N > 1 else 0.0
    steps = math.ceil(S * max(fastest, 1.0) / (2.0 * math.pi) * points_per_period)
    return max(2, steps + steps % 2)


def averaging_cell(cell: EpsCell) -> list[dict[str, Any]]:
    cfg = cell.cfg
    log = cell.logger(logger)
    system = cfg.level_system()
    exact = psi_averaged(system, cfg.field, cell.scaling).entries
    positive = exact > 1e-12 * max(float(exact.max(initial=0.0)), 1e-300)
    rows: list[dict[str, Any]] = []
    for S in snapped_windows(cfg.field, cfg.average_oracle):
        steps = quadrature_steps(system, cfg.field, S, cfg.average_oracle.points_per_period)
        diff = np.abs(average_oracle(system, cfg.field, cell.scaling, S, steps) - exact)
        relative = (
            float(np.max(diff[positive] / exact[positive])) if np.any(positive) else 0.0
        )
        log.info(f"S={S:.6g}: residual {float(diff.max()):.4e}, relative {relative:.4e}")
        rows.append(
            {
                "eps": cell.eps,
                "S": S,
                "quad_steps": steps,
                "residual": float(diff.max()),
                "relative_error": relative,
            }
        )
    return rows


def run_averaging_oracle(cfg: ExperimentConfig) -> StudyOutput:
    """Compare Cesàro averages over the S grid with the closed-form averaged rate.

    For every eps the residual must fall like ``S^-1`` (within
    ``slope_tolerance``) and at the largest S every positive entry must match
    to ``relative_tolerance``. A field that never couples the levels gives
    zero residuals and passes trivially.
    """
    settings = cfg.average_oracle
    per_eps = map_ordered(averaging_cell, eps_cells(cfg), cfg.jobs)
    rows = [row for block in per_eps for row in block]

    checks: dict[str, bool] = {}
    notes: list[str] = []
    slopes: list[dict[str, Any]] = []
    binding: SlopeFit | None = None
    for block in per_eps:
        eps = block[0]["eps"]
        residuals = [row["residual"] for row in block]
        checks[f"relative_eps={eps:g}"] = block[-1]["relative_error"] <= settings.relative_tolerance
        if max(residuals) <= _VANISHING_RESIDUAL:
            notes.append(f"eps={eps:g}: residuals vanish")
            continue
        if len(block) < MIN_FIT_POINTS:
            notes.append(f"eps={eps:g}: fewer than {MIN_FIT_POINTS} windows, no slope")
            continue
        fit = fit_loglog([row["S"] for row in block], residuals)
        checks[f"slope_eps={eps:g}"] = within_band(fit, EXPECTED_SLOPE, settings.slope_tolerance)
        slopes.append({"eps": eps, "slope": fit.slope, "stderr": fit.stderr})
        if binding is None or abs(fit.slope - EXPECTED_SLOPE) > abs(binding.slope - EXPECTED_SLOPE):
            binding = fit

    result = build_result(
        "average-oracle",
        cfg,
        checks=checks,
        table=rows,
        fit=binding,
        expected=EXPECTED_SLOPE,
        tolerance=settings.slope_tolerance,
        notes=notes,
    )
    tables = {"series": table_from_rows(rows)}
    if slopes:
        tables["slopes"] = table_from_rows(slopes)
    return StudyOutput(result=result, tables=tables)

