"""Transition rates induced by the field: time dependent, averaged and dominant.

Tables are indexed ``[k, n]`` for the rate carrying population from level
``k`` to level ``n`` (the convention of ``sharpen``).
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field
from logging import getLogger

import numpy as np
from numpy.typing import NDArray
from scipy.integrate import simpson

from bloch_rates._model.field import QuasiPeriodicField
from bloch_rates._model.scaling import Scaling
from bloch_rates._model.system import LevelSystem
from bloch_rates._sharp.operator import RateMatrix
from bloch_rates._util.constants import RESONANCE_RTOL
from bloch_rates._util.error import RegimeError

logger = getLogger(__name__)

Beta = tuple[int, ...]

# s-points evaluated at once by the averaging quadrature
_QUAD_CHUNK = 2048


@dataclass(frozen=True)
class ResonanceSet:
    """For each ordered pair ``(n, m)`` the support multi-indices with ``omega(n,m) + beta.omega = 0``."""

    N: int
    tolerance: float
    pairs: dict[tuple[int, int], tuple[Beta, ...]] = dataclass_field(
        default_factory=dict
    )

    def betas(self, n: int, m: int) -> tuple[Beta, ...]:
        return self.pairs.get((n, m), ())

    def is_empty(self) -> bool:
        return not self.pairs

    def to_json(self) -> dict[str, list[list[int]]]:
        """1-based ``"n,m"`` keys."""
        return {
            f"{n + 1},{m + 1}": [list(beta) for beta in betas]
            for (n, m), betas in sorted(self.pairs.items())
        }


def default_resonance_tolerance(
    system: LevelSystem, field: QuasiPeriodicField
) -> float:
    level = float(np.max(np.abs(system.omega_diff()))) if system.N > 1 else 0.0
    modes = field.mode_frequencies()
    mode = float(np.max(np.abs(modes))) if modes.size else 0.0
    return RESONANCE_RTOL * (1.0 + level + mode)


def resonance_set(
    system: LevelSystem, field: QuasiPeriodicField, tol_res: float | None = None
) -> ResonanceSet:
    """Collect exact (to ``tol_res``) resonances between level pairs and field modes."""
    if tol_res is None:
        tol_res = default_resonance_tolerance(system, field)
    if tol_res <= 0:
        raise ValueError("tol_res must be positive.")
    omega = system.omega_diff()
    alphas = field.alphas
    modes = field.mode_frequencies()
    pairs: dict[tuple[int, int], tuple[Beta, ...]] = {}
    for n in range(system.N):
        for m in range(system.N):
            if n == m:
                continue
            hits = np.flatnonzero(np.abs(omega[n, m] + modes) <= tol_res)
            if hits.size:
                pairs[(n, m)] = tuple(tuple(int(a) for a in alphas[i]) for i in hits)
    return ResonanceSet(N=system.N, tolerance=tol_res, pairs=pairs)


def resonant_weight(
    system: LevelSystem, field: QuasiPeriodicField, res: ResonanceSet
) -> NDArray[np.float64]:
    """``C(n,m) = 2 |V(n,m)|^2 sum over resonant beta of |phi_beta|^2``."""
    if res.N != system.N:
        raise ValueError(f"resonance set is for N={res.N}, system has N={system.N}.")
    weights = np.zeros((system.N, system.N))
    for (n, m), betas in res.pairs.items():
        weights[n, m] = sum(field.weight(beta) for beta in betas)
    return 2.0 * np.abs(system.V_matrix) ** 2 * weights


def _offdiagonal(table: NDArray[np.float64]) -> NDArray[np.float64]:
    out = np.array(table, dtype=float)
    np.fill_diagonal(out, 0.0)
    return out


def _lorentzian_sum(
    system: LevelSystem,
    field: QuasiPeriodicField,
    damping: NDArray[np.float64],
    detuning: NDArray[np.float64],
) -> NDArray[np.float64]:
    """``2|V(n,k)|^2 sum_beta damping / (damping^2 + |omega(k,n) + beta.omega + detuning|^2) |phi_beta|^2`` at ``[k, n]``."""
    if field.is_zero():
        return np.zeros((system.N, system.N))
    omega_kn = system.omega_diff()
    offset = omega_kn[:, :, None] + field.mode_frequencies()[None, None, :]
    offset = offset + detuning[:, :, None]
    weights = np.abs(field.values) ** 2
    d = damping[:, :, None]
    denominator = d**2 + offset**2
    terms = np.divide(
        d * weights, denominator, out=np.zeros_like(denominator), where=denominator > 0
    )
    return _offdiagonal(2.0 * np.abs(system.V_matrix.T) ** 2 * terms.sum(axis=2))


def psi_averaged(
    system: LevelSystem, field: QuasiPeriodicField, scaling: Scaling
) -> RateMatrix:
    """Long-time average of the time dependent rate, in closed form.

    Entry ``[k, n]`` is::

        2|V(n,k)|^2 sum_beta eps^mu gamma(k,n)
            / (eps^(2 mu) gamma(k,n)^2 + |omega(k,n) + beta.omega + eps^p delta(k,n)|^2)
            * |phi_beta|^2

    The detuning enters with the sign of the time dependent rate, so this
    is its long-time average also when delta != 0. For a real field the
    beta sum is symmetric and ``omega(k,n)`` may be replaced by ``omega(n,k)``
    when delta = 0.
    """
    eps = scaling.eps
    return RateMatrix(
        _lorentzian_sum(
            system,
            field,
            damping=eps**scaling.mu * system.gamma_matrix,
            detuning=eps**scaling.p * system.delta_diff(),
        )
    )


def psi_dominant(
    system: LevelSystem,
    field: QuasiPeriodicField,
    scaling: Scaling,
    res: ResonanceSet,
) -> RateMatrix:
    """Resonant part of the averaged rate.

    Raises:
        RegimeError: If ``mu == 0``; the averaged rate is the right object there.
    """
    if scaling.mu == 0:
        raise RegimeError("psi_dominant needs mu > 0; use psi_averaged when mu = 0.")
    eps = scaling.eps
    gamma = eps**scaling.mu * system.gamma_matrix
    delta = eps**scaling.p * system.delta_diff()
    denominator = gamma**2 + delta**2
    factor = np.divide(
        gamma, denominator, out=np.zeros_like(denominator), where=denominator > 0
    )
    return RateMatrix(_offdiagonal(resonant_weight(system, field, res) * factor))


def w_mod(system: LevelSystem, psi_dom: RateMatrix) -> RateMatrix:
    """Modified relaxation rates ``psi_dom + W``."""
    if psi_dom.N != system.N:
        raise ValueError(f"dimension mismatch: rates {psi_dom.N} for N={system.N}.")
    return RateMatrix(psi_dom.entries + system.W_matrix)


def _psi_on_grid(
    system: LevelSystem,
    field: QuasiPeriodicField,
    scaling: Scaling,
    s: NDArray[np.float64],
) -> NDArray[np.float64]:
    """Time dependent rate at every fast time in ``s``, shape (len(s), N, N)."""
    n = system.N
    if field.is_zero() or n == 1:
        return np.zeros((s.shape[0], n, n))
    eps = scaling.eps
    modes = field.mode_frequencies()
    values = field.values
    damping = eps**scaling.mu * system.gamma_matrix
    detuning = system.omega_diff() + eps**scaling.p * system.delta_diff()
    # D[k, n, beta] = eps^mu gamma(k,n) + i (omega(k,n) + beta.omega + eps^p delta(k,n))
    D = damping[:, :, None] + 1j * (detuning[:, :, None] + modes[None, None, :])
    safe = np.abs(D) > 0
    D_safe = np.where(safe, D, 1.0)
    prefactor = 2.0 * np.abs(system.V_matrix.T) ** 2
    out = np.empty((s.shape[0], n, n))
    for start in range(0, s.shape[0], _QUAD_CHUNK):
        chunk = s[start : start + _QUAD_CHUNK]
        waves = np.exp(1j * np.multiply.outer(chunk, modes))
        phi = waves @ values
        sD = chunk[:, None, None, None] * D_safe[None]
        memory = np.where(safe[None], -np.expm1(-sD) / D_safe[None], chunk[:, None, None, None])
        inner = np.einsum("sb,snkb->snk", waves * values[None, :], memory)
        out[start : start + chunk.shape[0]] = prefactor[None] * np.real(
            phi[:, None, None] * inner
        )
    idx = np.arange(n)
    out[:, idx, idx] = 0.0
    return out


def psi_time_dependent(
    system: LevelSystem, field: QuasiPeriodicField, scaling: Scaling, s: float
) -> NDArray[np.float64]:
    """Time dependent transition rate at fast time ``s`` (may take either sign).

    Entry ``[k, n]`` is ``2|V(n,k)|^2 Re int_0^s exp(Omega(k,n) s') phi(s) phi(s - s') ds'``
    with ``Omega(k,n) = -i omega(k,n) - i eps^p delta(k,n) - eps^mu gamma(k,n)``,
    evaluated through its closed form double Fourier sum.
    """
    if s < 0:
        raise ValueError(f"s must be nonnegative, got {s}.")
    return _psi_on_grid(system, field, scaling, np.asarray([float(s)]))[0]


def average_oracle(
    system: LevelSystem,
    field: QuasiPeriodicField,
    scaling: Scaling,
    S: float,
    quad_steps: int,
) -> NDArray[np.float64]:
    """Cesàro average ``(1/S) int_0^S Psi(s) ds`` by composite Simpson quadrature."""
    if S <= 0:
        raise ValueError(f"S must be positive, got {S}.")
    if quad_steps < 2:
        raise ValueError("quad_steps must be at least 2.")
    grid = np.linspace(0.0, S, quad_steps + 1)
    values = _psi_on_grid(system, field, scaling, grid)
    logger.debug(f"average_oracle S={S} with {quad_steps} quadrature steps")
    return simpson(values, x=grid, axis=0) / S
