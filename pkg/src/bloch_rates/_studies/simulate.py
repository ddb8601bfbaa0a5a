"""Single runs: Bloch trajectories, rate-equation trajectories and rate tables."""

from __future__ import annotations

from logging import getLogger
from typing import Any

import numpy as np

from bloch_rates._bloch.diagnostics import conservation_diagnostics, trajectory_rows
from bloch_rates._bloch.solver import integrate_bloch
from bloch_rates._model.state import well_prepared_state
from bloch_rates._model.system import validate_system
from bloch_rates._rate_solver.integrate import (
    CONSERVATION_TOL,
    PopulationTrajectory,
    integrate_rate,
    integrate_rate_oscillating,
)
from bloch_rates._rate_solver.layers import solve_layered
from bloch_rates._rates.psi import psi_averaged, psi_dominant, resonance_set, w_mod
from bloch_rates._rates.regime import regime_for, split_AB
from bloch_rates._sharp.kernel import spectral_check
from bloch_rates._sharp.operator import RateMatrix, sharpen
from bloch_rates._studies.cells import EpsCell, eps_cells
from bloch_rates._studies.output import StudyOutput, Table, build_result, table_from_rows
from bloch_rates._types.experiment import ExperimentConfig
from bloch_rates._util.parallel import map_ordered
from bloch_rates._util.pydantic_util import model_dump

logger = getLogger(__name__)

BLOCH_CONSERVATION_TOL = 1e-8

SPLIT_RTOL = 1e-12


def _trajectory_name(eps: float) -> str:
    return f"trajectory_eps_{eps:g}"


def _population_table(traj: PopulationTrajectory) -> Table:
    return Table(
        header=["t"] + [f"rho_{n + 1}" for n in range(traj.N)],
        rows=[
            [float(t)] + [float(x) for x in pops]
            for t, pops in zip(traj.times, traj.populations)
        ],
    )


def bloch_cell(cell: EpsCell) -> tuple[dict[str, Any], Table]:
    cfg = cell.cfg
    system = cfg.level_system()
    y0 = cfg.initial_populations()
    traj = integrate_bloch(
        system, cfg.field, cell.scaling, well_prepared_state(y0), cfg.solver
    )
    report = conservation_diagnostics(traj)
    cell.logger(logger).info(f"{len(traj)} snapshots, trace drift {report.trace_drift:.3e}")
    header, rows = trajectory_rows(traj)
    row = {
        "eps": cell.eps,
        "snapshots": len(traj),
        "max_coherence_l1": float(np.max(traj.coherence_l1)),
        "trace_drift": report.trace_drift,
        "hermiticity_residual": report.hermiticity_residual,
        "positivity_violation": report.positivity_violation,
    }
    return row, Table(header=header, rows=rows)


def run_simulate_bloch(cfg: ExperimentConfig) -> StudyOutput:
    """Integrate the Bloch equations at every eps and check conservation."""
    results = map_ordered(bloch_cell, eps_cells(cfg), cfg.jobs)
    rows = [row for row, _ in results]
    conserved = all(
        max(row["trace_drift"], row["hermiticity_residual"], row["positivity_violation"])
        <= BLOCH_CONSERVATION_TOL
        for row in rows
    )
    tables = {"series": table_from_rows(rows)}
    for row, table in results:
        tables[_trajectory_name(row["eps"])] = table
    result = build_result(
        "simulate-bloch", cfg, checks={"conservation": conserved}, table=rows
    )
    return StudyOutput(result=result, tables=tables)


def rate_cell(cell: EpsCell) -> tuple[dict[str, Any], Table]:
    cfg = cell.cfg
    settings = cfg.simulate
    system = cfg.level_system()
    scaling = cell.scaling
    y0 = cfg.initial_populations()
    row: dict[str, Any] = {"eps": cell.eps}
    if settings.rate == "oscillating":
        traj = integrate_rate_oscillating(
            system,
            cfg.field,
            scaling,
            y0,
            settings.T,
            steps_per_period=settings.steps_per_period,
            snapshots=settings.steps,
        )
    elif settings.rate == "limit":
        layered = solve_layered(system, cfg.field, scaling, y0, settings.T, settings.steps)
        traj = layered.limit
        row |= {
            "sup_error": layered.sup_error,
            "gap": layered.gap,
            "bound_constant": layered.bound_constant,
        }
    else:
        if settings.rate == "W":
            rate = RateMatrix.of(system.W_matrix)
        elif settings.rate == "averaged":
            rate = w_mod(system, psi_averaged(system, cfg.field, scaling))
        else:
            psi = psi_dominant(system, cfg.field, scaling, resonance_set(system, cfg.field))
            rate = w_mod(system, psi)
        traj = integrate_rate(rate, y0, settings.T, settings.steps)
    row |= {
        "total_drift": traj.total_drift(),
        "min_population": traj.min_population(),
    }
    cell.logger(logger).info(f"{settings.rate} rate: drift {row['total_drift']:.3e}")
    return row, _population_table(traj)


def run_simulate_rate(cfg: ExperimentConfig) -> StudyOutput:
    """Integrate the selected rate equation at every eps.

    The projected limit system does not conserve the total population of
    the non-polarized part, so only the other rates are checked for
    conservation and positivity.
    """
    results = map_ordered(rate_cell, eps_cells(cfg), cfg.jobs)
    rows = [row for row, _ in results]
    checks: dict[str, bool] = {}
    if cfg.simulate.rate != "limit":
        checks["conservation"] = all(
            row["total_drift"] <= CONSERVATION_TOL * max(1.0, sum(cfg.initial_populations().values))
            for row in rows
        )
        checks["positivity"] = all(row["min_population"] >= -CONSERVATION_TOL for row in rows)
    tables = {"series": table_from_rows(rows)}
    for row, table in results:
        tables[_trajectory_name(row["eps"])] = table
    result = build_result(
        "simulate-rate", cfg, checks=checks, table=rows, channel=cfg.simulate.rate
    )
    return StudyOutput(result=result, tables=tables)


def rates_cell(cell: EpsCell) -> tuple[list[dict[str, Any]], dict[str, Any], dict[str, bool]]:
    """Rate tables at one eps, with the regime, resonances and spectral diagnostics."""
    cfg = cell.cfg
    system = cfg.level_system()
    scaling = cell.scaling
    res = resonance_set(system, cfg.field)
    averaged = psi_averaged(system, cfg.field, scaling).entries
    W = system.W_matrix
    zeros = np.zeros_like(W)
    dominant = A = B_eps = B0 = zeros
    checks: dict[str, bool] = {}
    details: dict[str, Any] = {
        "eps": cell.eps,
        "resonances": res.to_json(),
    }
    details["regime"] = model_dump(regime_for(scaling, system))
    if scaling.mu > 0:
        dominant = psi_dominant(system, cfg.field, scaling, res).entries
        split = split_AB(system, cfg.field, scaling, res)
        A, B_eps, B0 = split.A.entries, split.B_eps.entries, split.B0.entries
        recombined = scaling.eps ** (-scaling.mu) * A + scaling.eps ** (-split.nu) * B_eps
        scale = max(1.0, float(np.max(np.abs(dominant))))
        checks[f"split_eps={cell.eps:g}"] = bool(
            np.max(np.abs(recombined - dominant), initial=0.0) <= SPLIT_RTOL * scale
        )
        modified = w_mod(system, RateMatrix(dominant))
    else:
        modified = w_mod(system, RateMatrix(averaged))
    spectral = spectral_check(sharpen(modified), symmetric=modified.is_symmetric(), seed=cfg.seed)
    checks[f"spectral_eps={cell.eps:g}"] = spectral.passed
    details["spectral"] = model_dump(spectral)
    rows = [
        {
            "eps": cell.eps,
            "k": k + 1,
            "n": n + 1,
            "averaged": float(averaged[k, n]),
            "dominant": float(dominant[k, n]),
            "A": float(A[k, n]),
            "B_eps": float(B_eps[k, n]),
            "B0": float(B0[k, n]),
            "W": float(W[k, n]),
        }
        for k in range(system.N)
        for n in range(system.N)
        if k != n
    ]
    return rows, details, checks


def run_rates(cfg: ExperimentConfig) -> StudyOutput:
    """Tabulate the averaged and dominant rates, their splitting and the regime at every eps.

    Checks that the two parts of the splitting recombine into the dominant
    rate and that the modified rate generator has a nonpositive spectrum.
    """
    system = cfg.level_system()
    validation = validate_system(system)
    results = map_ordered(rates_cell, eps_cells(cfg), cfg.jobs)
    rows = [row for block, _, _ in results for row in block]
    checks: dict[str, bool] = {"valid_system": validation.valid}
    for _, _, cell_checks in results:
        checks |= cell_checks
    details = {
        "validation": model_dump(validation),
        "cells": [cell_details for _, cell_details, _ in results],
    }
    result = build_result(
        "rates",
        cfg,
        checks=checks,
        table=rows,
        notes=list(validation.violations),
        details=details,
    )
    return StudyOutput(result=result, tables={"series": table_from_rows(rows)})
