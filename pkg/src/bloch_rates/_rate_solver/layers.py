"""Projectors, spectral gap and time-layer analysis of the singular rate equation.

The full generator ``eps^-mu A + eps^-nu B_eps + W`` relaxes its
non-polarized part ``(1 - Pi) y`` within a layer of duration ``eps^sigma``;
afterwards ``Pi y`` follows the limit system ``Pi (W + Psi0)# Pi``.
"""

from __future__ import annotations

from dataclasses import dataclass
from logging import getLogger
from typing import Callable, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict, Field
from scipy.linalg import eigh, svd
from scipy.stats import linregress

from bloch_rates._model.field import QuasiPeriodicField
from bloch_rates._model.scaling import Scaling
from bloch_rates._model.state import Populations
from bloch_rates._model.system import LevelSystem
from bloch_rates._rate_solver.integrate import (
    PopulationTrajectory,
    integrate_generator,
    integrate_rate,
)
from bloch_rates._rates.psi import ResonanceSet, resonance_set
from bloch_rates._rates.regime import (
    RegimeInfo,
    _near,
    regime_for,
    split_AB,
)
from bloch_rates._sharp.kernel import stable_blocks
from bloch_rates._sharp.operator import RateMatrix, sharpen
from bloch_rates._util.constants import KERNEL_RTOL
from bloch_rates._util.error import KernelError, NoLayerError, RegimeError

logger = getLogger(__name__)

PROJECTOR_TOL = 1e-10

# singular values within this factor of the kernel threshold make the rank ambiguous
_RANK_MARGIN = 100.0

# a tail whose spread stays below this fraction of its maximum is a relaxation floor
FLOOR_SPREAD = 0.1

# norms below this fraction of the initial one are integration noise
_NORM_NOISE = 1e-12


@dataclass(frozen=True)
class ProjectorSet:
    """``Pi0`` projects off the decoupled levels; ``Pi`` onto the relevant kernel within them."""

    Pi0: NDArray[np.float64]
    Pi: NDArray[np.float64]
    basis: NDArray[np.float64]
    decoupled: tuple[int, ...]
    uses_B0: bool

    @property
    def N(self) -> int:
        return self.Pi.shape[0]

    @property
    def kernel_projector(self) -> NDArray[np.float64]:
        """``Pi + (1 - Pi0)``: the whole kernel, decoupled levels included."""
        return self.Pi + (np.eye(self.N) - self.Pi0)

    @property
    def complement(self) -> NDArray[np.float64]:
        return np.eye(self.N) - self.kernel_projector

    def residuals(self, *tables: RateMatrix) -> dict[str, float]:
        """Idempotence, symmetry and annihilation residuals of ``Pi``."""
        P = self.Pi
        out = {
            "idempotence": float(np.max(np.abs(P @ P - P), initial=0.0)),
            "symmetry": float(np.max(np.abs(P - P.T), initial=0.0)),
        }
        for index, table in enumerate(tables):
            M = sharpen(table).matrix
            out[f"annihilation_{index}"] = float(
                max(np.max(np.abs(P @ M), initial=0.0), np.max(np.abs(M @ P), initial=0.0))
            )
        return out


def _stable_kernel(stacked: NDArray[np.float64], columns: int) -> NDArray[np.float64]:
    if stacked.size == 0 or columns == 0:
        return np.eye(columns)
    _, sigma, vh = svd(stacked)
    if sigma.size == 0 or sigma[0] == 0.0:
        return np.eye(columns)
    threshold = KERNEL_RTOL * sigma[0]
    ambiguous = (sigma > threshold / _RANK_MARGIN) & (sigma < threshold * _RANK_MARGIN)
    if np.any(ambiguous):
        raise KernelError(
            f"kernel rank unstable: singular value {sigma[ambiguous][0]:.3e} near threshold {threshold:.3e}."
        )
    rank = int(np.sum(sigma > threshold))
    return vh[rank:].T.copy()


def build_projectors(
    A: RateMatrix,
    B0: RateMatrix,
    regime: RegimeInfo,
    W: RateMatrix | None = None,
) -> ProjectorSet:
    """Build ``Pi0`` and ``Pi`` for the regime's kernel (``Ker A# & Ker B0#`` or ``Ker A#``).

    Raises:
        ValueError: If ``A`` or ``B0`` is not symmetric or dimensions differ.
        KernelError: If a singular value sits too close to the kernel threshold.
    """
    N = A.N
    if B0.N != N or (W is not None and W.N != N):
        raise ValueError("A, B0 and W must have the same dimension.")
    if not A.is_symmetric() or not B0.is_symmetric():
        raise ValueError("build_projectors needs symmetric A and B0.")
    coupled = A.entries + B0.entries + (W.entries if W is not None else 0.0)
    active = (np.any(coupled != 0, axis=0)) | (np.any(coupled != 0, axis=1))
    idx = np.flatnonzero(active)
    Pi0 = np.diag(active.astype(float))

    blocks = [sharpen(A).matrix]
    if regime.uses_B0:
        blocks.append(sharpen(B0).matrix)
    stacked = np.vstack([block[:, idx] for block in blocks])
    local = _stable_kernel(stacked, idx.size)
    basis = np.zeros((N, local.shape[1]))
    basis[idx] = local
    Pi = basis @ basis.T
    decoupled = tuple(int(i) + 1 for i in np.flatnonzero(~active))
    logger.debug(
        f"projectors: kernel dimension {basis.shape[1]}, decoupled levels {list(decoupled)}"
    )
    return ProjectorSet(
        Pi0=Pi0, Pi=Pi, basis=basis, decoupled=decoupled, uses_B0=regime.uses_B0
    )


def _range_basis(proj: ProjectorSet) -> NDArray[np.float64]:
    values, vectors = eigh(proj.complement)
    return vectors[:, values > 0.5]


def _gap_generator(A: RateMatrix, B0: RateMatrix, proj: ProjectorSet) -> NDArray[np.float64]:
    M = sharpen(A).matrix
    if proj.uses_B0:
        M = M + sharpen(B0).matrix
    return M


def spectral_gap_c(A: RateMatrix, B0: RateMatrix, proj: ProjectorSet) -> float:
    """Smallest eigenvalue of ``-(A + B0)#`` on the range of ``1 - Pi``; ``inf`` when that range is trivial.

    In the ``Ker A#`` regimes ``B0`` does not enter.
    """
    U = _range_basis(proj)
    if U.shape[1] == 0:
        return float("inf")
    H = -U.T @ _gap_generator(A, B0, proj) @ U
    return float(eigh(0.5 * (H + H.T), eigvals_only=True)[0])


class GapCheck(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    eps: float
    max_eigenvalue: float | None = Field(
        description="Largest nonzero eigenvalue of (1-Pi) G_eps (1-Pi)."
    )
    bound: float = Field(description="-c eps^-exponent.")
    passed: bool


def check_gap_bound(
    A: RateMatrix,
    B0: RateMatrix,
    proj: ProjectorSet,
    mu: float,
    exponent: float,
    eps_grid: Sequence[float],
    B_eps: Callable[[float], RateMatrix] | None = None,
    rtol: float = 1e-8,
) -> list[GapCheck]:
    """Check that every nonzero eigenvalue of ``(1-Pi)(eps^-mu A + eps^-exponent B_eps)#(1-Pi)`` is at most ``-c eps^-exponent``.

    ``B_eps`` defaults to ``B0`` for every ``eps``.
    """
    c = spectral_gap_c(A, B0, proj)
    U = _range_basis(proj)
    rows: list[GapCheck] = []
    for eps in eps_grid:
        bound = -c * eps ** (-exponent)
        if U.shape[1] == 0:
            rows.append(GapCheck(eps=eps, max_eigenvalue=None, bound=bound, passed=True))
            continue
        G = eps ** (-mu) * sharpen(A).matrix
        if proj.uses_B0:
            B = B_eps(eps) if B_eps is not None else B0
            G = G + eps ** (-exponent) * sharpen(B).matrix
        H = U.T @ G @ U
        top = float(eigh(0.5 * (H + H.T), eigvals_only=True)[-1])
        rows.append(
            GapCheck(
                eps=eps,
                max_eigenvalue=top,
                bound=bound,
                passed=top <= bound * (1.0 - rtol),
            )
        )
    return rows


class LayerFit(BaseModel):
    """Log-linear fit of the non-polarized norm over its decaying segment."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    eps: float
    decay_detected: bool
    rate: float | None = Field(default=None, description="Fitted decay rate.")
    rate_stderr: float | None = None
    intercept: float | None = None
    r_squared: float | None = None
    points: int = 0
    initial: float
    plateau: float
    predicted_rate: float | None = Field(
        default=None, description="c eps^-sigma when the gap constant is known."
    )
    layer_duration: float | None = Field(
        default=None, description="Time at which the fitted decay meets the plateau."
    )
    exponent: float | None = Field(default=None, description="Layer exponent sigma.")

    @property
    def rate_ratio(self) -> float | None:
        if self.rate is None or not self.predicted_rate:
            return None
        return self.rate / self.predicted_rate


def nonpolarized_norms(
    traj: PopulationTrajectory, proj: ProjectorSet
) -> NDArray[np.float64]:
    """``||(1 - Pi) y(t)||_2`` at every snapshot."""
    return np.linalg.norm(traj.populations @ proj.complement.T, axis=1)


def timelayer_analysis(
    traj: PopulationTrajectory,
    proj: ProjectorSet,
    scaling: Scaling,
    regime: RegimeInfo,
    gap: float | None = None,
) -> LayerFit:
    """Fit the initial decay of ``||(1 - Pi) y||``.

    The plateau is the median of the final 10% of snapshots and the fit uses
    the snapshots from the first one below half the initial norm up to the
    first one below ``10 plateau``.

    When the final 10% is flat (spread below ``FLOOR_SPREAD`` of its
    maximum) the norm has settled on a relaxation floor, and the fitted
    quantity is ``||(1 - Pi)(y(t) - y(T))||`` so the floor does not bend the
    logarithm; the window is then placed on that quantity and ends ten
    times above its own tail median. A tail still decaying is fitted as is.

    Raises:
        NoLayerError: If the decaying segment has fewer than three snapshots.
    """
    nonpolarized = traj.populations @ proj.complement.T
    norms = np.linalg.norm(nonpolarized, axis=1)
    initial = float(norms[0])
    tail = max(1, len(norms) // 10)
    tail_norms = norms[-tail:]
    plateau = float(np.median(tail_norms))
    top = float(np.max(tail_norms))
    floored = top > 0 and float(np.ptp(tail_norms)) <= FLOOR_SPREAD * top
    decaying = (
        np.linalg.norm(nonpolarized - nonpolarized[-1], axis=1) if floored else norms
    )
    exponent = regime.sigma
    predicted = (
        gap * scaling.eps ** (-exponent)
        if gap is not None and exponent is not None and np.isfinite(gap)
        else None
    )
    scale = max(1.0, float(np.abs(traj.populations[0]).sum()))
    if initial <= PROJECTOR_TOL * scale:
        return LayerFit(
            eps=scaling.eps,
            decay_detected=False,
            initial=initial,
            plateau=plateau,
            predicted_rate=predicted,
            exponent=exponent,
        )

    head = float(decaying[0])
    below_half = np.flatnonzero(decaying <= 0.5 * head)
    if below_half.size == 0:
        raise NoLayerError(f"eps={scaling.eps}: the non-polarized norm never halves.")
    start = int(below_half[0])
    residual = float(np.median(decaying[-tail:])) if floored else plateau
    floor = 10.0 * max(residual, _NORM_NOISE * head)
    below_floor = np.flatnonzero(decaying[start:] < floor)
    stop = start + int(below_floor[0]) if below_floor.size else len(norms)
    segment = np.arange(start, stop)
    segment = segment[decaying[segment] > 0]
    if segment.size < 3:
        raise NoLayerError(
            f"eps={scaling.eps}: decaying segment has {segment.size} snapshots; "
            "integrate further or refine the time grid."
        )
    fit = linregress(traj.times[segment], np.log(decaying[segment]))
    rate = -float(fit.slope)
    duration = (
        (float(fit.intercept) - np.log(plateau)) / rate if rate > 0 and plateau > 0 else None
    )
    return LayerFit(
        eps=scaling.eps,
        decay_detected=rate > 0,
        rate=rate,
        rate_stderr=float(fit.stderr),
        intercept=float(fit.intercept),
        r_squared=float(fit.rvalue**2),
        points=int(segment.size),
        initial=initial,
        plateau=plateau,
        predicted_rate=predicted,
        layer_duration=duration,
        exponent=exponent,
    )


def limit_system(
    proj: ProjectorSet,
    W: RateMatrix,
    psi0_nonsing: RateMatrix | None = None,
    regime: RegimeInfo | None = None,
) -> NDArray[np.float64]:
    """Generator ``Pi (W + Psi0)# Pi`` of the polarized dynamics.

    Raises:
        RegimeError: If a nonzero ``psi0_nonsing`` is given outside ``mu = 2p``.
    """
    if W.N != proj.N:
        raise ValueError(f"dimension mismatch: W {W.N} for N={proj.N}.")
    total = W
    if psi0_nonsing is not None and np.any(psi0_nonsing.entries):
        if regime is not None and not _near(regime.ratio, 2.0):
            raise RegimeError(
                f"a non-singular remainder only arises at mu/p = 2, got {regime.ratio:.6g}."
            )
        total = W + psi0_nonsing
    P = proj.kernel_projector
    return P @ sharpen(total).matrix @ P


def kernel_blocks(A: RateMatrix, B0: RateMatrix, proj: ProjectorSet) -> list[list[int]]:
    """Levels sharing one polarized state.

    These are the components of ``A``, or of ``A + B0`` when the kernel is
    ``Ker A# & Ker B0#``; decoupled levels come out as singletons.
    """
    return stable_blocks(A + B0 if proj.uses_B0 else A)


def lumped_rate(rate: RateMatrix, blocks: Sequence[Sequence[int]]) -> RateMatrix:
    """Block to block rates seen by the polarized dynamics.

    A polarized state is uniform on every block, so the rate from block
    ``b`` to block ``c`` is ``sum over k in b, n in c of rate[k, n] / |b|``.
    """
    entries = rate.entries
    out = np.zeros((len(blocks), len(blocks)))
    for i, source in enumerate(blocks):
        for j, target in enumerate(blocks):
            if i != j:
                out[i, j] = entries[np.ix_(source, target)].sum() / len(source)
    return RateMatrix(out)


@dataclass(frozen=True)
class LayeredSolution:
    full: PopulationTrajectory
    limit: PopulationTrajectory
    error: NDArray[np.float64]
    gap: float
    exponent: float
    bound_constant: float
    regime: RegimeInfo

    @property
    def sup_error(self) -> float:
        """``sup_t ||Pi (y - z)(t)||_2``."""
        return float(self.error.max())


def full_generator(
    A: RateMatrix, B_eps: RateMatrix, W: RateMatrix, scaling: Scaling
) -> RateMatrix:
    """``eps^-mu A + eps^-nu B_eps + W``."""
    eps = scaling.eps
    return A.scaled(eps ** (-scaling.mu)) + B_eps.scaled(eps ** (-scaling.nu)) + W


def solve_layered(
    system: LevelSystem,
    field: QuasiPeriodicField,
    scaling: Scaling,
    rho_d0: Populations | ArrayLike,
    T: float,
    steps: int = 2000,
    res: ResonanceSet | None = None,
) -> LayeredSolution:
    """Integrate the singular rate equation and its limit system side by side.

    ``bound_constant`` is the smallest ``C`` with
    ``||Pi (y - z)|| <= C (eps^nu + exp(-c t eps^-sigma))`` on the snapshot grid.
    """
    regime = regime_for(scaling, system, finite_N=True)
    if res is None:
        res = resonance_set(system, field)
    split = split_AB(system, field, scaling, res)
    W = RateMatrix.of(system.W_matrix)
    proj = build_projectors(split.A, split.B0, regime, W)
    psi0 = split.B0 if _near(regime.ratio, 2.0) else None
    y = integrate_rate(full_generator(split.A, split.B_eps, W, scaling), rho_d0, T, steps)
    P = proj.kernel_projector
    z = integrate_generator(
        limit_system(proj, W, psi0, regime), P @ y.populations[0], T, steps
    )
    error = np.linalg.norm((y.populations - z.populations) @ P.T, axis=1)
    gap = spectral_gap_c(split.A, split.B0, proj)
    exponent = regime.sigma if regime.sigma is not None else scaling.nu
    envelope = scaling.eps ** max(scaling.nu, 0.0) + (
        np.exp(-gap * y.times * scaling.eps ** (-exponent)) if np.isfinite(gap) else 0.0
    )
    return LayeredSolution(
        full=y,
        limit=z,
        error=error,
        gap=gap,
        exponent=exponent,
        bound_constant=float(np.max(error / envelope)),
        regime=regime,
    )
