"""Long-time limit of the rate equation: blockwise equilibria and the Gibbs form."""

from __future__ import annotations

from dataclasses import dataclass
from logging import getLogger
from typing import Any

import numpy as np
from numpy.typing import NDArray

from bloch_rates._model.system import LevelSystem, hermitian_tolerance
from bloch_rates._rate_solver.integrate import PopulationTrajectory, integrate_generator
from bloch_rates._rate_solver.layers import (
    build_projectors,
    kernel_blocks,
    limit_system,
    lumped_rate,
)
from bloch_rates._rates.psi import psi_averaged, psi_dominant, resonance_set, w_mod
from bloch_rates._rates.regime import _near, regime_for, split_AB
from bloch_rates._sharp.kernel import equilibrium_state, stable_blocks
from bloch_rates._sharp.operator import RateMatrix, sharpen
from bloch_rates._studies.cells import EpsCell, eps_cells
from bloch_rates._studies.output import StudyOutput, Table, build_result, table_from_rows
from bloch_rates._types.experiment import ExperimentConfig
from bloch_rates._util.parallel import map_ordered

logger = getLogger(__name__)

KERNEL_TOL = 1e-10
TRACE_TOL = 1e-12
CONSTANT_TOL = 1e-12


@dataclass(frozen=True)
class EquilibriumProblem:
    """Generator integrated by the study and the lumped rate whose equilibrium it must reach.

    ``blocks`` groups levels that share one polarized state; the generator
    keeps every state uniform on each block, so its long-time limit is
    ``equilibrium_state(lumped, block masses)`` spread evenly over each block.
    """

    generator: NDArray[np.float64]
    start: NDArray[np.float64]
    blocks: list[list[int]]
    lumped: RateMatrix
    total: RateMatrix

    def lift(self, masses: NDArray[np.float64]) -> NDArray[np.float64]:
        out = np.zeros(self.start.shape[0])
        for block, mass in zip(self.blocks, masses):
            out[block] = mass / len(block)
        return out

    def masses(self, y: NDArray[np.float64]) -> NDArray[np.float64]:
        return np.array([y[block].sum() for block in self.blocks])


def equilibrium_rate(cell: EpsCell) -> RateMatrix:
    """``W`` alone, or the dominant (averaged when ``mu = 0``) rate plus ``W``."""
    cfg = cell.cfg
    system = cfg.level_system()
    if cfg.equilibrium.rate == "W":
        return RateMatrix.of(system.W_matrix)
    scaling = cell.scaling
    if scaling.mu > 0:
        psi = psi_dominant(system, cfg.field, scaling, resonance_set(system, cfg.field))
    else:
        psi = psi_averaged(system, cfg.field, scaling)
    return w_mod(system, psi)


def equilibrium_problem(cell: EpsCell) -> EquilibriumProblem:
    """The generator whose long-time limit the study checks.

    With ``rate: limit`` and ``mu > 0`` this is the polarized dynamics
    ``P (W + Psi0)# P`` started from ``P y0``; otherwise the plain rate
    equation of ``equilibrium_rate`` with every level its own block.
    """
    cfg = cell.cfg
    y0 = np.asarray(cfg.initial_populations().values, dtype=float)
    if cfg.equilibrium.rate != "limit" or cell.scaling.mu == 0:
        rate = equilibrium_rate(cell)
        return EquilibriumProblem(
            generator=sharpen(rate).matrix,
            start=y0,
            blocks=[[k] for k in range(rate.N)],
            lumped=rate,
            total=rate,
        )
    system = cfg.level_system()
    scaling = cell.scaling
    regime = regime_for(scaling, system, finite_N=True)
    split = split_AB(system, cfg.field, scaling, resonance_set(system, cfg.field))
    W = RateMatrix.of(system.W_matrix)
    proj = build_projectors(split.A, split.B0, regime, W)
    psi0 = split.B0 if _near(regime.ratio, 2.0) else None
    total = W + psi0 if psi0 is not None else W
    blocks = kernel_blocks(split.A, split.B0, proj)
    return EquilibriumProblem(
        generator=limit_system(proj, W, psi0, regime),
        start=proj.kernel_projector @ y0,
        blocks=blocks,
        lumped=lumped_rate(total, blocks),
        total=total,
    )


def microreversibility_residual(system: LevelSystem, rate: RateMatrix) -> float | None:
    """``max |R(n,m) - exp((omega(n) - omega(m)) / T) R(m,n)|``, or None without a temperature."""
    if system.temperature is None:
        return None
    factor = np.exp(system.omega_diff() / system.temperature)
    return float(np.max(np.abs(rate.entries - factor * rate.entries.T)))


def _block_gibbs(
    system: LevelSystem, blocks: list[list[int]], mass: NDArray[np.float64]
) -> NDArray[np.float64]:
    assert system.temperature is not None
    omega = system.omega_vector
    target = mass.copy()
    for block in blocks:
        idx = np.asarray(block)
        weights = np.exp(-(omega[idx] - omega[idx].min()) / system.temperature)
        target[idx] = weights / weights.sum() * mass[idx].sum()
    return target


def equilibrium_cell(cell: EpsCell) -> tuple[dict[str, Any], PopulationTrajectory]:
    cfg = cell.cfg
    settings = cfg.equilibrium
    log = cell.logger(logger)
    system = cfg.level_system()
    problem = equilibrium_problem(cell)
    traj = integrate_generator(problem.generator, problem.start, settings.T, settings.steps)
    initial = problem.start
    masses0 = problem.masses(initial)
    lumped_target = equilibrium_state(problem.lumped, masses0).values
    target = problem.lift(lumped_target)
    lumped_blocks = stable_blocks(problem.lumped)
    scale = max(1.0, float(initial.sum()))

    block_trace = max(
        abs(float(lumped_target[block].sum() - masses0[block].sum()))
        for block in lumped_blocks
    )
    fixed = [
        level
        for block in lumped_blocks
        if len(block) == 1
        for level in problem.blocks[block[0]]
    ]
    decoupled_drift = (
        float(np.max(np.abs(traj.populations[:, fixed] - initial[fixed])))
        if fixed
        else 0.0
    )
    symmetric = [
        block
        for block in lumped_blocks
        if len(block) > 1 and problem.lumped.restrict(block).is_symmetric()
    ]
    uniform_spread = max(
        (float(np.ptp(lumped_target[block])) for block in symmetric), default=0.0
    )
    trivial = all(len(block) == 1 for block in problem.blocks)
    micro = microreversibility_residual(system, problem.total) if trivial else None
    gibbs_applicable = micro is not None and micro <= hermitian_tolerance(
        problem.total.entries
    )
    gibbs_error = (
        float(np.max(np.abs(traj.final - _block_gibbs(system, lumped_blocks, initial))))
        if gibbs_applicable
        else None
    )
    distance = float(np.linalg.norm(traj.final - target))
    log.info(f"endpoint distance {distance:.3e} over {len(problem.blocks)} kernel blocks")
    row = {
        "eps": cell.eps,
        "endpoint_distance": distance,
        "kernel_residual": float(np.linalg.norm(problem.generator @ target)),
        "block_trace_error": block_trace,
        "decoupled_drift": decoupled_drift,
        "uniform_spread": uniform_spread,
        "microreversibility_residual": micro,
        "gibbs_error": gibbs_error,
        "kernel_blocks": len(problem.blocks),
        "blocks": len(lumped_blocks),
        "scale": scale,
        "rate_scale": max(1.0, float(np.max(problem.total.entries, initial=0.0))),
    }
    return row, traj


def run_equilibrium_study(cfg: ExperimentConfig) -> StudyOutput:
    """Integrate the rate equation to large times at every eps and check its limit.

    With the default ``rate: limit`` the integrated generator is the limit
    system ``P (W + Psi0)# P`` of the singular rate equation, whose states
    stay uniform on every kernel block; the target is the equilibrium of the
    block-lumped rate spread over each block. The endpoint must be within
    ``equilibrium.tolerance`` of that target, which itself must lie in the
    kernel and carry the initial mass of every block. Blocks that exchange no
    mass must not move and symmetric blocks must end uniform. When every
    kernel block is a single level and the rate satisfies microreversibility
    the endpoint is also compared with the blockwise Gibbs distribution.
    """
    tolerance = cfg.equilibrium.tolerance
    results = map_ordered(equilibrium_cell, eps_cells(cfg), cfg.jobs)
    rows = [row for row, _ in results]
    checks = {
        "endpoint": all(row["endpoint_distance"] <= tolerance for row in rows),
        "kernel": all(row["kernel_residual"] <= KERNEL_TOL * row["rate_scale"] for row in rows),
        "block_trace": all(
            row["block_trace_error"] <= TRACE_TOL * row["scale"] for row in rows
        ),
        "decoupled_constant": all(
            row["decoupled_drift"] <= CONSTANT_TOL * row["scale"] for row in rows
        ),
        "symmetric_uniform": all(
            row["uniform_spread"] <= CONSTANT_TOL * row["scale"] for row in rows
        ),
    }
    notes: list[str] = []
    if all(row["gibbs_error"] is not None for row in rows):
        checks["gibbs"] = all(row["gibbs_error"] <= tolerance for row in rows)
    elif any(row["kernel_blocks"] < cfg.N for row in rows):
        notes.append("kernel blocks span several levels: Gibbs form not checked")
    else:
        notes.append("rate is not microreversible: Gibbs form not checked")

    last = results[-1][1]
    trajectory = Table(
        header=["t"] + [f"rho_{n + 1}" for n in range(last.N)],
        rows=[
            [float(t)] + [float(x) for x in pops]
            for t, pops in zip(last.times, last.populations)
        ],
    )
    result = build_result(
        "equilibrium",
        cfg,
        checks=checks,
        table=rows,
        channel=cfg.equilibrium.rate,
        notes=notes,
    )
    return StudyOutput(
        result=result,
        tables={"series": table_from_rows(rows), "trajectory": trajectory},
    )
