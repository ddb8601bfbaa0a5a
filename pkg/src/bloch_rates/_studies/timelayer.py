"""Time-layer exponents of the singular rate equation across the eps grid."""

from __future__ import annotations

from logging import getLogger
from typing import Any

import numpy as np

from bloch_rates._rate_solver.integrate import integrate_rate
from bloch_rates._rate_solver.layers import (
    build_projectors,
    full_generator,
    nonpolarized_norms,
    spectral_gap_c,
    timelayer_analysis,
)
from bloch_rates._rates.psi import resonance_set
from bloch_rates._rates.regime import regime_for, split_AB
from bloch_rates._sharp.operator import RateMatrix
from bloch_rates._studies.cells import EpsCell, eps_cells
from bloch_rates._studies.fit import MIN_FIT_POINTS, fit_loglog, within_band
from bloch_rates._studies.output import StudyOutput, Table, build_result, table_from_rows
from bloch_rates._types.experiment import ExperimentConfig, TimelayerConfig
from bloch_rates._util.error import StudyError
from bloch_rates._util.parallel import map_ordered

logger = getLogger(__name__)

# slack on the rate band for fits of an exact exponential
_BAND_RTOL = 1e-6


def final_time(settings: TimelayerConfig, predicted_rate: float | None) -> float:
    """``timelayer.T`` when set, else ``horizon`` layer times ``1 / predicted_rate``."""
    if settings.T is not None:
        return settings.T
    if predicted_rate is None or not np.isfinite(predicted_rate) or predicted_rate <= 0:
        return settings.horizon
    return settings.horizon / predicted_rate


def timelayer_cell(cell: EpsCell) -> tuple[dict[str, Any], list[list[float]]]:
    """Layer fit at one eps, plus the ``(eps, t, norm)`` series of the non-polarized norm."""
    cfg = cell.cfg
    log = cell.logger(logger)
    system = cfg.level_system()
    scaling = cell.scaling
    regime = regime_for(scaling, system, finite_N=True)
    if not regime.homogeneous or regime.sigma is None:
        raise StudyError(f"mu/p = {regime.ratio:.6g} has no time-layer exponent.")
    split = split_AB(system, cfg.field, scaling, resonance_set(system, cfg.field))
    W = RateMatrix.of(system.W_matrix)
    proj = build_projectors(split.A, split.B0, regime, W)
    gap = spectral_gap_c(split.A, split.B0, proj)
    predicted = gap * scaling.eps ** (-regime.sigma) if np.isfinite(gap) else None
    T = final_time(cfg.timelayer, predicted)
    traj = integrate_rate(
        full_generator(split.A, split.B_eps, W, scaling),
        cfg.initial_populations(),
        T,
        cfg.timelayer.steps,
    )
    fit = timelayer_analysis(traj, proj, scaling, regime, gap)
    log.info(
        f"T {T:.4g}: rate {fit.rate if fit.rate is not None else float('nan'):.4e}, "
        f"plateau {fit.plateau:.4e}, gap {gap:.4e}"
    )
    row = {
        "eps": cell.eps,
        "T": T,
        "rate": fit.rate,
        "rate_stderr": fit.rate_stderr,
        "predicted_rate": fit.predicted_rate,
        "rate_ratio": fit.rate_ratio,
        "initial": fit.initial,
        "plateau": fit.plateau,
        "layer_duration": fit.layer_duration,
        "r_squared": fit.r_squared,
        "points": fit.points,
        "decay_detected": fit.decay_detected,
        "gap": gap,
        "sigma": regime.sigma,
        "row": regime.row,
    }
    series = [
        [cell.eps, float(t), float(norm)]
        for t, norm in zip(traj.times, nonpolarized_norms(traj, proj))
    ]
    return row, series


def run_timelayer_study(cfg: ExperimentConfig) -> StudyOutput:
    """Fit the layer decay at every eps and compare its scaling with ``sigma``.

    Each eps is integrated for ``timelayer.horizon`` predicted layer times
    unless ``timelayer.T`` fixes a common final time. The fitted rates must
    scale like ``eps^-sigma`` and, when ``W`` is present, the plateau of the
    non-polarized norm like ``eps^sigma``; both slopes are held to
    ``timelayer.tolerance``. Every fitted rate must also lie within
    ``timelayer.rate_band`` of ``c eps^-sigma``.

    Raises:
        StudyError: With fewer than three eps values, or a regime without a
            homogeneous reduction.
    """
    settings = cfg.timelayer
    results = map_ordered(timelayer_cell, eps_cells(cfg, minimum=MIN_FIT_POINTS), cfg.jobs)
    rows = [row for row, _ in results]
    sigma = float(rows[0]["sigma"])
    eps = [row["eps"] for row in rows]

    checks = {"decay_detected": all(row["decay_detected"] for row in rows)}
    notes: list[str] = [f"regime row: {rows[0]['row']}"]
    rate_fit = None
    if checks["decay_detected"]:
        rate_fit = fit_loglog(eps, [row["rate"] for row in rows])
        checks["rate_slope"] = within_band(rate_fit, -sigma, settings.tolerance)
        low, high = settings.rate_band
        checks["rate_band"] = all(
            row["rate_ratio"] is None
            or low * (1.0 - _BAND_RTOL) <= row["rate_ratio"] <= high * (1.0 + _BAND_RTOL)
            for row in rows
        )
    if np.any(cfg.level_system().W_matrix) and all(row["plateau"] > 0 for row in rows):
        plateau_fit = fit_loglog(eps, [row["plateau"] for row in rows])
        checks["plateau_slope"] = within_band(plateau_fit, sigma, settings.tolerance)
        notes.append(
            f"plateau slope {plateau_fit.slope:.4f} +/- {plateau_fit.stderr:.2g}"
        )
    else:
        notes.append("no relaxation floor (W = 0): plateau slope not checked")

    norms = Table(
        header=["eps", "t", "norm"],
        rows=[entry for _, series in results for entry in series],
    )
    result = build_result(
        "timelayer",
        cfg,
        checks=checks,
        table=rows,
        fit=rate_fit,
        expected=-sigma,
        tolerance=settings.tolerance,
        notes=notes,
    )
    return StudyOutput(
        result=result, tables={"series": table_from_rows(rows), "norms": norms}
    )
