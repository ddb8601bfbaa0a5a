"""Finite-range checks of the small divisor hypotheses.

The hypotheses quantify over every multi-index and every pair of levels;
here they are scanned on ``0 < |alpha|_1 <= B_max`` and the ``N`` levels of
the system, and every report carries ``B_max`` so a margin is never read as
a statement about the infinite range. Levels are weighted with their
1-based index: ``(1 + n)^(1 + eta)``.
"""

from __future__ import annotations

import itertools
import math
from logging import getLogger

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field

from bloch_rates._model.field import QuasiPeriodicField
from bloch_rates._model.scaling import Scaling
from bloch_rates._model.system import LevelSystem
from bloch_rates._rates.psi import default_resonance_tolerance
from bloch_rates._util.constants import DEFAULT_ETA
from bloch_rates._util.error import RegimeError, StudyError

logger = getLogger(__name__)

# multi-indices scanned per vectorized block
_ALPHA_CHUNK = 4096

Triple = tuple[int, int, tuple[int, ...]]


class DiophParams(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    eta: float = Field(default=DEFAULT_ETA, gt=0, description="Exponent eta.")
    C_eta: float = Field(default=1.0, gt=0, description="Diophantine constant C_eta.")
    N_eta: float = Field(
        default=1.0, gt=0, description="Reinforced smoothness exponent N_eta."
    )
    K: float = Field(default=2.0, gt=0, description="Decay exponent of the W tails.")
    B_max: int | None = Field(
        default=None,
        ge=0,
        description="Scan bound on |alpha|_1; defaults to 10 times the field support bound.",
    )

    def resolve_B_max(self, field: QuasiPeriodicField) -> int:
        return self.B_max if self.B_max is not None else 10 * field.support_bound

    def check_scaling(self, scaling: Scaling) -> None:
        if self.N_eta <= 2 * scaling.ratio:
            raise ValueError(
                f"N_eta={self.N_eta} must exceed 2 mu/p = {2 * scaling.ratio:.6g}."
            )


def multi_indices(r: int, B_max: int, include_zero: bool = False) -> NDArray[np.int64]:
    """All ``alpha`` in ``Z^r`` with ``|alpha|_1 <= B_max`` in lexicographic order."""
    if r < 1:
        raise ValueError("r must be at least 1.")
    if B_max < 0:
        raise ValueError("B_max must be nonnegative.")
    rows = [
        alpha
        for alpha in itertools.product(range(-B_max, B_max + 1), repeat=r)
        if sum(abs(a) for a in alpha) <= B_max and (include_zero or any(alpha))
    ]
    if not rows:
        return np.zeros((0, r), dtype=np.int64)
    return np.asarray(rows, dtype=np.int64)


def alpha_weight(alphas: NDArray[np.int64], eta: float) -> NDArray[np.float64]:
    """``(1 + |alpha|_1)^(r - 1 + eta)`` per row."""
    r = alphas.shape[1]
    return (1.0 + np.sum(np.abs(alphas), axis=1)) ** (r - 1 + eta)


def level_weight(N: int, eta: float) -> NDArray[np.float64]:
    """``(1 + n)^(1 + eta) (1 + k)^(1 + eta)`` for 1-based ``n, k``."""
    single = (1.0 + np.arange(1, N + 1, dtype=float)) ** (1.0 + eta)
    return np.multiply.outer(single, single)


def _triple(n: int, k: int, alpha: NDArray[np.int64]) -> Triple:
    return (n + 1, k + 1, tuple(int(a) for a in alpha))


class DiophReport(BaseModel):
    """Margins of the two small divisor inequalities on the scanned range."""

    model_config = ConfigDict(extra="forbid")

    eta: float
    B_max: int
    C_eta: float
    scanned: int = Field(description="Non-resonant (alpha, n, k) combinations scanned.")
    margin_levels: float | None = Field(
        description="min |alpha.omega + omega(n,k)| weighted, over non-resonant triples."
    )
    witness_levels: Triple | None = None
    margin_field: float | None = Field(
        description="min |alpha.omega| (1 + |alpha|)^(r-1+eta) over alpha != 0."
    )
    witness_field: tuple[int, ...] | None = None
    resonances: list[Triple] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        margins = [m for m in (self.margin_levels, self.margin_field) if m is not None]
        return all(m >= self.C_eta for m in margins)


def _scan_levels(
    omega: NDArray[np.float64],
    freq: NDArray[np.float64],
    alphas: NDArray[np.int64],
    eta: float,
    tol: float,
) -> tuple[float | None, Triple | None, list[Triple], int]:
    """Minimal weighted margin of ``alpha.freq + omega(n,k)`` over ``alphas`` and all pairs."""
    N = omega.shape[0]
    lw = level_weight(N, eta)
    best: float | None = None
    witness: Triple | None = None
    resonances: list[Triple] = []
    scanned = 0
    for start in range(0, alphas.shape[0], _ALPHA_CHUNK):
        block = alphas[start : start + _ALPHA_CHUNK]
        x = np.abs((block @ freq)[:, None, None] + omega[None, :, :])
        resonant = x <= tol
        for a, n, k in np.argwhere(resonant):
            resonances.append(_triple(int(n), int(k), block[a]))
        margins = x * alpha_weight(block, eta)[:, None, None] * lw[None, :, :]
        margins = np.where(resonant, np.inf, margins)
        scanned += int(np.sum(~resonant))
        if np.all(resonant):
            continue
        a, n, k = np.unravel_index(int(np.argmin(margins)), margins.shape)
        value = float(margins[a, n, k])
        if best is None or value < best:
            best, witness = value, _triple(int(n), int(k), block[a])
    return best, witness, resonances, scanned


def check_dioph(
    system: LevelSystem, field: QuasiPeriodicField, params: DiophParams
) -> DiophReport:
    """Scan both small divisor inequalities on ``0 < |alpha| <= B_max`` and all level pairs.

    Combinations with ``alpha.omega + omega(n,k) = 0`` (to the resonance
    tolerance) are listed as resonances and left out of the level margin.
    """
    B_max = params.resolve_B_max(field)
    alphas = multi_indices(field.r, B_max)
    freq = field.freq_vector
    tol = default_resonance_tolerance(system, field)
    margin, witness, resonances, scanned = _scan_levels(
        system.omega_diff(), freq, alphas, params.eta, tol
    )
    margin_field: float | None = None
    witness_field: tuple[int, ...] | None = None
    if alphas.shape[0]:
        field_margins = np.abs(alphas @ freq) * alpha_weight(alphas, params.eta)
        index = int(np.argmin(field_margins))
        margin_field = float(field_margins[index])
        witness_field = tuple(int(a) for a in alphas[index])
    logger.debug(
        f"check_dioph B_max={B_max}: {scanned} combinations, {len(resonances)} resonances"
    )
    return DiophReport(
        eta=params.eta,
        B_max=B_max,
        C_eta=params.C_eta,
        scanned=scanned,
        margin_levels=margin,
        witness_levels=witness,
        margin_field=margin_field,
        witness_field=witness_field,
        resonances=resonances,
    )


class SpeedReport(BaseModel):
    model_config = ConfigDict(extra="forbid")

    eta: float
    C_eta: float
    margin: float | None = Field(
        description="min |omega(n,k)| (1+n)^(1+eta) (1+k)^(1+eta) over separated pairs."
    )
    witness: tuple[int, int] | None = None
    degenerate_pairs: list[tuple[int, int]] = Field(default_factory=list)
    note: str | None = None

    @property
    def passed(self) -> bool:
        return self.margin is None or self.margin >= self.C_eta


def check_speed(system: LevelSystem, params: DiophParams) -> SpeedReport:
    """Check that level energies do not accumulate too fast."""
    if system.N < 2:
        return SpeedReport(eta=params.eta, C_eta=params.C_eta, margin=None, note="no pairs")
    omega = system.omega_diff()
    tol = default_resonance_tolerance(system, QuasiPeriodicField.zero())
    margins = np.abs(omega) * level_weight(system.N, params.eta)
    off = ~np.eye(system.N, dtype=bool)
    degenerate = off & (np.abs(omega) <= tol)
    usable = off & ~degenerate
    degenerate_pairs = [
        (int(n) + 1, int(k) + 1) for n, k in np.argwhere(degenerate) if n < k
    ]
    if not np.any(usable):
        return SpeedReport(
            eta=params.eta,
            C_eta=params.C_eta,
            margin=None,
            degenerate_pairs=degenerate_pairs,
            note="all pairs degenerate",
        )
    masked = np.where(usable, margins, np.inf)
    n, k = np.unravel_index(int(np.argmin(masked)), masked.shape)
    return SpeedReport(
        eta=params.eta,
        C_eta=params.C_eta,
        margin=float(masked[n, k]),
        witness=(int(min(n, k)) + 1, int(max(n, k)) + 1),
        degenerate_pairs=degenerate_pairs,
    )


def estimate_C_eta(
    system: LevelSystem, field: QuasiPeriodicField, eta: float, B_max: int
) -> float:
    """Largest constant for which every scanned hypothesis holds; ``inf`` if nothing was scanned.

    A multi-index with ``alpha.omega = 0`` makes the field inequality fail
    for every positive constant, so the estimate is 0 there.
    """
    params = DiophParams(eta=eta, B_max=B_max)
    report = check_dioph(system, field, params)
    speed = check_speed(system, params)
    candidates = [
        m
        for m in (report.margin_levels, report.margin_field, speed.margin)
        if m is not None
    ]
    return min(candidates, default=math.inf)


class PerturbedReport(BaseModel):
    """Triples violating the halved inequality once levels move by ``eps^p delta``."""

    model_config = ConfigDict(extra="forbid")

    eps: float
    B_max: int
    C_eta: float
    triples: list[Triple] = Field(default_factory=list)
    size_bound: float | None = Field(
        default=None,
        description="C_eta eps^-p / (2 max|delta(n,k)|): lower bound on the weight of every triple.",
    )
    eps_threshold: float | None = Field(
        default=None, description="Below this eps no scanned triple violates."
    )
    note: str | None = None


def perturbed_violations(
    system: LevelSystem,
    field: QuasiPeriodicField,
    scaling: Scaling,
    params: DiophParams,
) -> PerturbedReport:
    """List the triples with ``|beta.omega + omega(n,k) + eps^p delta(n,k)|`` below half the bound.

    ``beta = 0`` is included (the level-speed hypothesis covers it) and the
    unperturbed resonances are left out. Every returned triple is checked
    against the size lower bound of the perturbed estimate.

    Raises:
        RegimeError: If ``mu == 0``.
        StudyError: If a triple breaks the size lower bound, which means
            ``C_eta`` exceeds what the unperturbed scan supports.
    """
    if scaling.mu == 0:
        raise RegimeError("perturbed_violations needs mu > 0.")
    params.check_scaling(scaling)
    B_max = params.resolve_B_max(field)
    delta = system.delta_diff()
    delta_max = float(np.max(np.abs(delta))) if system.N else 0.0
    if delta_max == 0.0:
        return PerturbedReport(
            eps=scaling.eps,
            B_max=B_max,
            C_eta=params.C_eta,
            note="delta = 0: no perturbation, nothing to check",
        )

    eps_p = scaling.eps**scaling.p
    alphas = multi_indices(field.r, B_max, include_zero=True)
    tol = default_resonance_tolerance(system, field)
    omega = system.omega_diff()
    lw = level_weight(system.N, params.eta)
    half = params.C_eta / 2.0
    size_bound = params.C_eta / (2.0 * eps_p * delta_max)

    triples: list[Triple] = []
    slack = math.inf
    for start in range(0, alphas.shape[0], _ALPHA_CHUNK):
        block = alphas[start : start + _ALPHA_CHUNK]
        unperturbed = (block @ field.freq_vector)[:, None, None] + omega[None, :, :]
        weight = alpha_weight(block, params.eta)[:, None, None] * lw[None, :, :]
        keep = np.abs(unperturbed) > tol
        violating = keep & (np.abs(unperturbed + eps_p * delta[None]) * weight <= half)
        for a, n, k in np.argwhere(violating):
            if weight[a, n, k] < size_bound * (1.0 - 1e-12):
                raise StudyError(
                    f"triple {_triple(int(n), int(k), block[a])} breaks the size bound: "
                    f"C_eta={params.C_eta} is larger than the scanned Diophantine constant."
                )
            triples.append(_triple(int(n), int(k), block[a]))
        moving = keep & (np.abs(delta)[None] > 0)
        if np.any(moving):
            gaps = np.abs(unperturbed) - half / weight
            slack = min(slack, float(np.min(gaps[moving])))

    threshold = 0.0 if slack <= 0 else (slack / delta_max) ** (1.0 / scaling.p)
    logger.debug(
        f"perturbed_violations eps={scaling.eps}: {len(triples)} triples, threshold {threshold:.3e}"
    )
    return PerturbedReport(
        eps=scaling.eps,
        B_max=B_max,
        C_eta=params.C_eta,
        triples=sorted(triples),
        size_bound=size_bound,
        eps_threshold=threshold if math.isfinite(slack) else None,
    )
