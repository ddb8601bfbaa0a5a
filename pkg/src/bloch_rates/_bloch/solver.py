"""Time integration of the eps-scaled Bloch equations.

The density matrix obeys::

    d/dt rho(n,m) = eps^-2 [-i omega_eps(n,m) rho(n,m) + Q_eps(rho)(n,m)]
                    + i eps^-1 phi(t/eps^2) [V, rho](n,m)

with ``omega_eps(n,m) = omega(n,m) + eps^p delta(n,m)``, off-diagonal
relaxation ``Q_eps = -eps^mu gamma(n,m) rho(n,m)`` and diagonal Pauli flow
``Q_eps = eps^2 (W# rho_d)(n)``.

The entrywise linear part is solved exactly: every step is a Lawson
(integrating factor) RK4 step whose exponentials are restarted at the start
of the step, so no growing factors appear even when ``eps^(mu-2) gamma t``
is large.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from logging import getLogger
from typing import Literal

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field

from bloch_rates._model.field import QuasiPeriodicField
from bloch_rates._model.scaling import Scaling
from bloch_rates._model.state import DensityMatrix
from bloch_rates._model.system import LevelSystem
from bloch_rates._sharp.operator import RateMatrix, sharpen
from bloch_rates._util.constants import DEFAULT_H0, DEFAULT_SNAPSHOTS
from bloch_rates._util.error import IntegrationError

logger = getLogger(__name__)


class SolverConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    T_final: float = Field(default=1.0, gt=0, description="Final time T.")
    h0: float = Field(
        default=DEFAULT_H0,
        gt=0,
        description="Base step factor: h = h0 eps^2 / (1 + max|alpha.omega| + max|omega_eps|).",
    )
    snapshot_stride: int | None = Field(
        default=None,
        ge=1,
        description="Steps between snapshots; default gives about 400 snapshots.",
    )
    method: Literal["lawson-rk4"] = Field(
        default="lawson-rk4", description="Time stepping scheme."
    )
    max_steps: int = Field(
        default=50_000_000, ge=1, description="Refuse runs needing more steps."
    )


@dataclass(frozen=True)
class BlochGenerator:
    """Precomputed pieces of the Bloch right-hand side for one (system, field, scaling)."""

    linear: NDArray[np.complex128]
    pauli: NDArray[np.float64]
    coupling: NDArray[np.complex128]
    mode_frequencies: NDArray[np.float64]
    mode_values: NDArray[np.complex128]
    eps: float

    @classmethod
    def build(
        cls, system: LevelSystem, field: QuasiPeriodicField, scaling: Scaling
    ) -> BlochGenerator:
        eps = scaling.eps
        omega_eps = system.omega_diff() + eps**scaling.p * system.delta_diff()
        linear = (-1j * omega_eps - eps**scaling.mu * system.gamma_matrix) / eps**2
        np.fill_diagonal(linear, 0.0)
        return cls(
            linear=linear,
            pauli=sharpen(RateMatrix.of(system.W_matrix)).matrix,
            coupling=system.V_matrix,
            mode_frequencies=field.mode_frequencies(),
            mode_values=field.values,
            eps=eps,
        )

    @property
    def N(self) -> int:
        return self.linear.shape[0]

    def phi(self, t: float) -> float:
        s = t / self.eps**2
        return float(np.real(np.exp(1j * self.mode_frequencies * s) @ self.mode_values))

    def nonlinear(self, phi: float, rho: NDArray[np.complex128]) -> NDArray[np.complex128]:
        """Everything but the entrywise linear part: coupling commutator and Pauli flow."""
        out = (1j * phi / self.eps) * (self.coupling @ rho - rho @ self.coupling)
        out[np.diag_indices_from(out)] += self.pauli @ np.real(np.diag(rho))
        return out

    def rhs(self, t: float, rho: NDArray[np.complex128]) -> NDArray[np.complex128]:
        return self.linear * rho + self.nonlinear(self.phi(t), rho)

    def step_size(self, h0: float) -> float:
        fastest_mode = (
            float(np.max(np.abs(self.mode_frequencies)))
            if self.mode_frequencies.size
            else 0.0
        )
        fastest_level = float(np.max(np.abs(self.linear.imag))) * self.eps**2
        return h0 * self.eps**2 / (1.0 + fastest_mode + fastest_level)


def bloch_rhs(
    system: LevelSystem,
    field: QuasiPeriodicField,
    scaling: Scaling,
    t: float,
    rho: DensityMatrix,
) -> DensityMatrix:
    """Time derivative of ``rho`` under the Bloch equations."""
    if rho.N != system.N:
        raise ValueError(f"dimension mismatch: state {rho.N} for N={system.N}.")
    generator = BlochGenerator.build(system, field, scaling)
    return DensityMatrix(generator.rhs(t, np.array(rho.entries)))


@dataclass(frozen=True)
class BlochTrajectory:
    times: NDArray[np.float64]
    states: NDArray[np.complex128]
    trace: NDArray[np.complex128]
    hermiticity_residual: NDArray[np.float64]
    min_population: NDArray[np.float64]
    coherence_l1: NDArray[np.float64]

    @classmethod
    def from_states(
        cls, times: NDArray[np.float64], states: NDArray[np.complex128]
    ) -> BlochTrajectory:
        if times.ndim != 1 or states.shape[0] != times.shape[0]:
            raise ValueError("times and states must have matching lengths.")
        if times.size > 1 and np.any(np.diff(times) <= 0):
            raise ValueError("snapshot times must be strictly increasing.")
        diagonals = np.diagonal(states, axis1=1, axis2=2)
        absolute = np.abs(states)
        return cls(
            times=times,
            states=states,
            trace=np.sum(diagonals, axis=1),
            hermiticity_residual=np.max(
                np.abs(states - np.conj(np.swapaxes(states, 1, 2))), axis=(1, 2)
            ),
            min_population=np.min(np.real(diagonals), axis=1),
            coherence_l1=np.sum(absolute, axis=(1, 2))
            - np.sum(np.abs(diagonals), axis=1),
        )

    def __len__(self) -> int:
        return self.times.shape[0]

    @property
    def N(self) -> int:
        return self.states.shape[1]

    def state(self, index: int) -> DensityMatrix:
        return DensityMatrix(self.states[index])

    def populations(self) -> NDArray[np.float64]:
        """(snapshots, N) array of rho(t, n, n)."""
        return np.real(np.diagonal(self.states, axis1=1, axis2=2)).copy()

    @property
    def final(self) -> DensityMatrix:
        return self.state(-1)


def integrate_bloch(
    system: LevelSystem,
    field: QuasiPeriodicField,
    scaling: Scaling,
    rho0: DensityMatrix,
    cfg: SolverConfig,
) -> BlochTrajectory:
    """Integrate the Bloch equations on ``[0, cfg.T_final]`` with fixed steps.

    Raises:
        IntegrationError: If the step count exceeds ``cfg.max_steps`` or the
            state stops being finite.
    """
    if rho0.N != system.N:
        raise ValueError(f"dimension mismatch: state {rho0.N} for N={system.N}.")
    generator = BlochGenerator.build(system, field, scaling)
    h_target = generator.step_size(cfg.h0)
    n_steps = max(1, math.ceil(cfg.T_final / h_target))
    if n_steps > cfg.max_steps:
        raise IntegrationError(
            f"step size underflow: {n_steps} steps of {h_target:.3e} exceed max_steps={cfg.max_steps}",
            0.0,
        )
    h = cfg.T_final / n_steps
    stride = cfg.snapshot_stride or max(1, n_steps // DEFAULT_SNAPSHOTS)
    logger.debug(
        f"integrate_bloch eps={scaling.eps} N={system.N}: {n_steps} steps of {h:.3e}, stride {stride}"
    )

    e_half = np.exp(generator.linear * (0.5 * h))
    e_full = e_half * e_half
    rho = np.array(rho0.entries, dtype=complex)
    times = [0.0]
    states = [rho.copy()]
    phi_next = generator.phi(0.0)
    for step in range(n_steps):
        t = step * h
        phi_now = phi_next
        phi_mid = generator.phi(t + 0.5 * h)
        phi_next = generator.phi(t + h)
        k1 = generator.nonlinear(phi_now, rho)
        k2 = generator.nonlinear(phi_mid, e_half * (rho + (0.5 * h) * k1))
        k3 = generator.nonlinear(phi_mid, e_half * rho + (0.5 * h) * k2)
        k4 = generator.nonlinear(phi_next, e_full * rho + h * (e_half * k3))
        rho = e_full * rho + (h / 6.0) * (
            e_full * k1 + 2.0 * e_half * (k2 + k3) + k4
        )
        if (step + 1) % stride == 0 or step + 1 == n_steps:
            t_now = (step + 1) * h
            if not np.all(np.isfinite(rho)):
                raise IntegrationError("non-finite state", t_now)
            times.append(t_now)
            states.append(rho.copy())
    return BlochTrajectory.from_states(np.asarray(times), np.asarray(states))
