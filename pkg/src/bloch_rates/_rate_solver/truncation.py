"""Truncation to finitely many levels and the choice of the truncation level."""

from __future__ import annotations

import math
from logging import getLogger

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field

from bloch_rates._dioph.checks import DiophParams
from bloch_rates._model.family import LevelFamily
from bloch_rates._model.field import QuasiPeriodicField
from bloch_rates._model.scaling import Scaling
from bloch_rates._model.system import LevelSystem, as_table
from bloch_rates._rate_solver.integrate import integrate_rate
from bloch_rates._rates.psi import psi_averaged, psi_dominant, resonance_set, w_mod
from bloch_rates._sharp.operator import mixed_norm
from bloch_rates._util.constants import CHOOSE_N_CAP
from bloch_rates._util.error import TruncationError

logger = getLogger(__name__)

# levels used to measure the coupling envelope and locate resonances
DEFAULT_SCAN = 64


def truncate(system: LevelSystem, N_keep: int) -> LevelSystem:
    """Restrict every table to the leading ``N_keep x N_keep`` block."""
    if not 1 <= N_keep <= system.N:
        raise ValueError(f"N_keep must lie in [1, {system.N}], got {N_keep}.")
    keep = slice(0, N_keep)
    return LevelSystem(
        omega=tuple(system.omega[keep]),
        delta=tuple(system.delta[keep]) if system.delta is not None else None,
        gamma=as_table(system.gamma_matrix[keep, keep]),
        W=as_table(system.W_matrix[keep, keep]) if system.W is not None else None,
        V=as_table(system.V_matrix[keep, keep]),
        temperature=system.temperature,
    )


def _tail_mixed_norm(table: NDArray[np.float64], N: int) -> float:
    """Mixed norm of the entries with at least one index beyond ``N``."""
    tail = np.array(table, dtype=float)
    tail[:N, :N] = 0.0
    return mixed_norm(tail)


class TruncationChoice(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    N: int
    eps: float
    population_tail: float = Field(description="||(1 - pi^N) rho(0)||_2.")
    W_tail: float = Field(description="Mixed norm of the W entries beyond N.")
    psi_tail_bound: float = Field(
        description="eps^-mu C_V (1 + N)^(-(1+eta) N_eta), C_V the far-from-continuum constant."
    )
    resonance_levels: int | None = Field(
        default=None,
        description="Highest level in a coupled resonant pair, when the tail is resonance free.",
    )
    epsilon_uniform: bool = Field(
        description="No coupled resonance beyond N, so N does not depend on eps."
    )


def _coupling_constant(family: LevelFamily, scan: int, exponent: float) -> float:
    """``sup_n sum_m ((1+n)(1+m))^exponent |V(n,m)|^2`` over the first ``scan`` levels."""
    n = family.levels(scan)
    weights = np.multiply.outer(1.0 + n, 1.0 + n) ** exponent
    return float(np.max(np.sum(weights * family.coupling_table(scan) ** 2, axis=1)))


def _resonance_reach(
    family: LevelFamily, field: QuasiPeriodicField, scan: int
) -> int | None:
    """Highest level in a coupled resonant pair, or ``None`` if resonances reach the scan edge."""
    system = family.build(scan)
    res = resonance_set(system, field)
    coupled = [
        max(n, m) + 1
        for (n, m) in res.pairs
        if system.V_matrix[n, m] != 0
    ]
    reach = max(coupled, default=0)
    return reach if reach <= scan // 2 else None


def choose_N(
    family: LevelFamily,
    scaling: Scaling,
    params: DiophParams,
    nu_tol: float,
    field: QuasiPeriodicField,
    scan: int = DEFAULT_SCAN,
) -> TruncationChoice:
    """Smallest ``N`` for which every computable truncation surrogate is below ``nu_tol``.

    Candidates double from 1 until all criteria hold, then a bisection finds
    the smallest one. Population and ``W`` tails are measured on the first
    ``2N`` levels.

    Raises:
        TruncationError: If no ``N`` up to ``CHOOSE_N_CAP`` qualifies.
    """
    if nu_tol <= 0:
        raise ValueError(f"nu_tol must be positive, got {nu_tol}.")
    exponent = (1.0 + params.eta) * params.N_eta
    C_V = _coupling_constant(family, scan, exponent)
    reach = _resonance_reach(family, field, scan)
    prefactor = scaling.eps ** (-scaling.mu) * C_V

    def measure(N: int) -> TruncationChoice:
        pops = family.populations(2 * N).values
        bound = prefactor * (1.0 + N) ** (-exponent)
        return TruncationChoice(
            N=N,
            eps=scaling.eps,
            population_tail=float(np.linalg.norm(pops[N:])),
            W_tail=_tail_mixed_norm(family.pauli_table(2 * N), N),
            psi_tail_bound=bound,
            resonance_levels=reach,
            epsilon_uniform=reach is not None and N >= reach,
        )

    def accepted(choice: TruncationChoice) -> bool:
        psi_ok = choice.epsilon_uniform or choice.psi_tail_bound <= nu_tol
        return psi_ok and choice.population_tail <= nu_tol and choice.W_tail <= nu_tol

    N = 1
    choice = measure(N)
    while not accepted(choice):
        N *= 2
        if N > CHOOSE_N_CAP:
            raise TruncationError(
                f"no N <= {CHOOSE_N_CAP} meets nu_tol={nu_tol} at eps={scaling.eps}."
            )
        choice = measure(N)
    low, high = N // 2, N
    best = choice
    while high - low > 1:
        mid = (low + high) // 2
        candidate = measure(mid)
        if accepted(candidate):
            high, best = mid, candidate
        else:
            low = mid
    logger.debug(
        f"choose_N eps={scaling.eps}: N={best.N} (uniform={best.epsilon_uniform})"
    )
    return best


def truncation_error(
    family: LevelFamily,
    field: QuasiPeriodicField,
    scaling: Scaling,
    N: int,
    T: float,
    steps: int = 200,
    reference_N: int | None = None,
) -> float:
    """``||rho_d^N - rho_d^M||`` in ``L^inf l^2`` for the dominant rate equation.

    The reference system has ``M = reference_N`` levels, ``2N`` by default.
    Levels beyond ``N`` count as zero in the smaller system, so the error
    includes the population the reference holds on levels ``N+1..M``; mass
    beyond level ``M`` is not seen. With ``mu = 0`` the averaged rate
    replaces the dominant one.

    Raises:
        ValueError: If ``reference_N`` is not larger than ``N``.
    """
    M = 2 * N if reference_N is None else reference_N
    if M <= N:
        raise ValueError(f"reference_N must exceed N={N}, got {M}.")

    def solve(size: int) -> NDArray[np.float64]:
        system = family.build(size)
        if scaling.mu > 0:
            psi = psi_dominant(system, field, scaling, resonance_set(system, field))
        else:
            psi = psi_averaged(system, field, scaling)
        rate = w_mod(system, psi)
        return integrate_rate(rate, family.populations(size), T, steps).populations

    small = solve(N)
    large = solve(M)
    padded = np.zeros_like(large)
    padded[:, :N] = small
    error = float(np.max(np.linalg.norm(large - padded, axis=1)))
    if not math.isfinite(error):
        raise ValueError("truncation error is not finite.")
    return error
