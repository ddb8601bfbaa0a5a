"""Diophantine suite: small divisor scans, perturbed violations and genericity."""

from __future__ import annotations

import math
from logging import getLogger
from typing import Any

from bloch_rates._dioph.checks import (
    check_dioph,
    check_speed,
    estimate_C_eta,
    perturbed_violations,
)
from bloch_rates._dioph.genericity import (
    GENERICITY_HEADER,
    GenericityRow,
    genericity_experiment,
    genericity_rows,
)
from bloch_rates._studies.output import StudyOutput, Table, build_result
from bloch_rates._types.experiment import ExperimentConfig
from bloch_rates._util.error import StudyError
from bloch_rates._util.pydantic_util import model_dump

logger = getLogger(__name__)

PERTURBED_HEADER = ["eps", "violations", "size_bound", "eps_threshold", "triples"]


def genericity_checks(
    rows: list[GenericityRow], ratio_band: float
) -> tuple[dict[str, bool], list[str]]:
    """Monotonicity of the violation fraction in ``c`` and boundedness of ``fraction / c``."""
    ordered = sorted(rows, key=lambda row: row.c)
    fractions = [row.violation_fraction for row in ordered]
    checks = {
        "genericity_monotone": all(b >= a for a, b in zip(fractions, fractions[1:]))
    }
    notes: list[str] = []
    ratios = [row.violation_fraction / row.c for row in ordered if row.c > 0 and row.violation_fraction > 0]
    if len(ratios) >= 2:
        spread = max(ratios) / min(ratios)
        checks["genericity_bounded"] = spread <= ratio_band
        notes.append(f"fraction / c spread {spread:.3f} over {len(ratios)} values of c")
    else:
        notes.append("fewer than two positive violation fractions: fraction / c not checked")
    return checks, notes


def run_dioph_suite(cfg: ExperimentConfig) -> StudyOutput:
    """Bundle the unperturbed scans, the perturbed scan at every eps and the genericity run.

    Violation lists must not grow as eps decreases and must be empty below
    the scanned eps threshold. The genericity CSV depends only on the config
    and the seed.
    """
    system = cfg.level_system()
    params = cfg.dioph
    report = check_dioph(system, cfg.field, params)
    speed = check_speed(system, params)
    B_max = params.resolve_B_max(cfg.field)
    estimate = estimate_C_eta(system, cfg.field, params.eta, B_max)
    checks: dict[str, bool] = {"dioph": report.passed, "speed": speed.passed}
    notes: list[str] = []
    if report.resonances:
        notes.append(f"{len(report.resonances)} resonant combinations excluded from the scan")

    rows: list[dict[str, Any]] = []
    if cfg.scaling.mu == 0:
        notes.append("mu = 0: no perturbed scan")
    else:
        for scaling in cfg.scaling.scalings():
            try:
                perturbed = perturbed_violations(system, cfg.field, scaling, params)
            except ValueError as e:
                if isinstance(e, StudyError):
                    raise
                raise StudyError(str(e)) from e
            if perturbed.note:
                notes.append(perturbed.note)
                break
            rows.append(
                {
                    "eps": scaling.eps,
                    "violations": len(perturbed.triples),
                    "size_bound": perturbed.size_bound,
                    "eps_threshold": perturbed.eps_threshold,
                    "triples": ";".join(
                        f"{n}:{k}:{'/'.join(str(b) for b in beta)}"
                        for n, k, beta in perturbed.triples
                    ),
                }
            )
            logger.info(f"eps={scaling.eps:g}: {len(perturbed.triples)} perturbed violations")
    if rows:
        counts = [row["violations"] for row in rows]
        checks["violations_shrink"] = all(b <= a for a, b in zip(counts, counts[1:]))
        checks["empty_below_threshold"] = all(
            row["violations"] == 0
            for row in rows
            if row["eps_threshold"] is not None and row["eps"] < row["eps_threshold"]
        )

    tables = {
        "series": Table(
            header=list(PERTURBED_HEADER),
            rows=[[row[key] for key in PERTURBED_HEADER] for row in rows],
        )
    }
    details: dict[str, Any] = {
        "dioph": model_dump(report),
        "speed": model_dump(speed),
        "C_eta_estimate": estimate if math.isfinite(estimate) else None,
    }
    genericity = cfg.dioph_suite.genericity
    if genericity is not None:
        sampled = genericity_experiment(
            r=genericity.r,
            ball_radius=genericity.ball_radius,
            eta=params.eta,
            omegas=system.omega_vector,
            n_samples=genericity.n_samples,
            c_grid=genericity.c_grid,
            seed=cfg.seed,
            B_max=genericity.B_max,
            jobs=cfg.jobs,
        )
        generic_checks, generic_notes = genericity_checks(sampled, genericity.ratio_band)
        checks |= generic_checks
        notes += generic_notes
        tables["genericity"] = Table(
            header=list(GENERICITY_HEADER), rows=genericity_rows(sampled)
        )

    result = build_result(
        "dioph", cfg, checks=checks, table=rows, notes=notes, details=details
    )
    return StudyOutput(result=result, tables=tables)
