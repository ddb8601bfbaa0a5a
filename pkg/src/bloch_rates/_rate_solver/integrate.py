"""Integration of rate equations for the populations."""

from __future__ import annotations

import math
from dataclasses import dataclass
from logging import getLogger

import numpy as np
from numpy.typing import ArrayLike, NDArray

from bloch_rates._model.field import QuasiPeriodicField
from bloch_rates._model.scaling import Scaling
from bloch_rates._model.state import Populations
from bloch_rates._model.system import LevelSystem
from bloch_rates._rates.psi import _psi_on_grid
from bloch_rates._sharp.operator import RateMatrix, SharpOperator, propagator, sharpen
from bloch_rates._util.error import IntegrationError

logger = getLogger(__name__)

CONSERVATION_TOL = 1e-10


@dataclass(frozen=True)
class PopulationTrajectory:
    times: NDArray[np.float64]
    populations: NDArray[np.float64]

    def __post_init__(self) -> None:
        if self.populations.ndim != 2 or self.populations.shape[0] != self.times.shape[0]:
            raise ValueError("times and populations must have matching lengths.")

    def __len__(self) -> int:
        return self.times.shape[0]

    @property
    def N(self) -> int:
        return self.populations.shape[1]

    @property
    def final(self) -> NDArray[np.float64]:
        return self.populations[-1].copy()

    def total_drift(self) -> float:
        totals = self.populations.sum(axis=1)
        return float(np.max(np.abs(totals - totals[0])))

    def min_population(self) -> float:
        return float(np.min(self.populations))


def _initial(rho_d0: Populations | ArrayLike) -> NDArray[np.float64]:
    if isinstance(rho_d0, Populations):
        return np.array(rho_d0.values, dtype=float)
    return np.array(rho_d0, dtype=float)


def _check_grid(T: float, steps: int) -> None:
    if T <= 0:
        raise ValueError(f"T must be positive, got {T}.")
    if steps < 1:
        raise ValueError(f"steps must be at least 1, got {steps}.")


def _report(traj: PopulationTrajectory, label: str) -> PopulationTrajectory:
    drift = traj.total_drift()
    lowest = traj.min_population()
    if drift > CONSERVATION_TOL * max(1.0, abs(traj.populations[0].sum())):
        logger.warning(f"{label}: total population drifted by {drift:.3e}")
    if lowest < -CONSERVATION_TOL:
        logger.warning(f"{label}: population dipped to {lowest:.3e}")
    return traj


def integrate_generator(
    generator: SharpOperator | NDArray[np.float64],
    rho_d0: Populations | ArrayLike,
    T: float,
    steps: int,
) -> PopulationTrajectory:
    """Snapshots of ``exp(t G) rho_d0`` at ``t = k T / steps``, ``k = 0..steps``.

    One dense exponential of the step is applied repeatedly; the generator
    may be any matrix (projected limit systems are not of the form ``A#``).
    """
    _check_grid(T, steps)
    if isinstance(generator, SharpOperator):
        matrix = generator.matrix
    else:
        matrix = np.asarray(generator, dtype=float)
    y = _initial(rho_d0)
    if y.shape != (matrix.shape[0],):
        raise ValueError(
            f"dimension mismatch: populations {y.shape} for N={matrix.shape[0]}."
        )
    step = propagator(generator, T / steps)
    out = np.empty((steps + 1, y.shape[0]))
    out[0] = y
    for k in range(steps):
        out[k + 1] = step @ out[k]
    if not np.all(np.isfinite(out)):
        raise IntegrationError("non-finite populations", T)
    return PopulationTrajectory(np.linspace(0.0, T, steps + 1), out)


def integrate_rate(
    rate: RateMatrix, rho_d0: Populations | ArrayLike, T: float, steps: int
) -> PopulationTrajectory:
    """Solve ``d/dt rho_d = rate# rho_d`` exactly at ``steps + 1`` snapshot times."""
    traj = integrate_generator(sharpen(rate), rho_d0, T, steps)
    return _report(traj, "integrate_rate")


def integrate_rate_oscillating(
    system: LevelSystem,
    field: QuasiPeriodicField,
    scaling: Scaling,
    rho_d0: Populations | ArrayLike,
    T: float,
    steps_per_period: int = 32,
    snapshots: int = 400,
) -> PopulationTrajectory:
    """Solve ``d/dt rho_d = (Psi_eps(t / eps^2) + W)# rho_d`` with classical RK4.

    The time dependent rate oscillates on the fast scale ``eps^2``; the step
    resolves its fastest frequency with ``steps_per_period`` steps.
    """
    _check_grid(T, snapshots)
    if steps_per_period < 4:
        raise ValueError("steps_per_period must be at least 4.")
    y = _initial(rho_d0)
    if y.shape != (system.N,):
        raise ValueError(f"dimension mismatch: populations {y.shape} for N={system.N}.")
    eps2 = scaling.eps**2
    modes = field.mode_frequencies()
    fastest = 2.0 * (float(np.max(np.abs(modes))) if modes.size else 0.0)
    fastest += float(np.max(np.abs(system.omega_diff()))) if system.N > 1 else 0.0
    h_fast = 2.0 * math.pi / max(fastest, 1.0) / steps_per_period
    n_steps = math.ceil(T / (eps2 * h_fast))
    n_steps = snapshots * math.ceil(n_steps / snapshots)
    h = T / n_steps
    stride = n_steps // snapshots
    logger.debug(f"integrate_rate_oscillating eps={scaling.eps}: {n_steps} RK4 steps of {h:.3e}")

    pauli = sharpen(RateMatrix.of(system.W_matrix)).matrix
    idx = np.arange(system.N)
    out = np.empty((snapshots + 1, system.N))
    out[0] = y
    # rate tables at t_k, t_k + h/2 and t_{k+1} are evaluated per snapshot block
    for block in range(snapshots):
        t0 = block * stride * h
        s_grid = (t0 + 0.5 * h * np.arange(2 * stride + 1)) / eps2
        rates = _psi_on_grid(system, field, scaling, s_grid)
        generators = np.swapaxes(rates, 1, 2).copy()
        generators[:, idx, idx] = -rates.sum(axis=2)
        generators += pauli[None]
        for j in range(stride):
            g0, g_mid, g1 = generators[2 * j], generators[2 * j + 1], generators[2 * j + 2]
            k1 = g0 @ y
            k2 = g_mid @ (y + 0.5 * h * k1)
            k3 = g_mid @ (y + 0.5 * h * k2)
            k4 = g1 @ (y + h * k3)
            y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(y)):
            raise IntegrationError("non-finite populations", (block + 1) * stride * h)
        out[block + 1] = y
    traj = PopulationTrajectory(np.linspace(0.0, T, snapshots + 1), out)
    return _report(traj, "integrate_rate_oscillating")
