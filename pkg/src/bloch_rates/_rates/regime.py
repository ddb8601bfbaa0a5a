"""Regime classification by mu/p and the singular/regular splitting of the dominant rate."""

from __future__ import annotations

from typing import Literal, NamedTuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from bloch_rates._model.field import QuasiPeriodicField
from bloch_rates._model.scaling import RATIO_TOLERANCE, Scaling
from bloch_rates._model.system import LevelSystem
from bloch_rates._rates.psi import (
    ResonanceSet,
    _lorentzian_sum,
    _offdiagonal,
    resonant_weight,
)
from bloch_rates._sharp.operator import RateMatrix
from bloch_rates._util.constants import DELTA_RTOL
from bloch_rates._util.error import RegimeError

ProjectorKind = Literal["kernel_AB0", "kernel_A"]

PsiAppForm = Literal[
    "averaged", "inv_gamma", "lorentzian", "gamma_over_delta2", "zero"
]

NO_REDUCTION = "no homogeneous reduction"


class RegimeInfo(BaseModel):
    """What the ratio mu/p implies for rates, projectors and the time layer."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    mu: float
    p: float
    ratio: float
    finite_N: bool
    W_zero: bool
    row: str = Field(description="Label of the matching table row.")
    sigma: float | None = Field(
        description="Time-layer exponent; None when no homogeneous reduction exists."
    )
    nu: float = Field(description="Exponent of the B part.")
    projector: ProjectorKind
    difference: str | None = Field(
        default=None,
        description="What differs from the unperturbed model (finite N only).",
    )
    psi_app_form: PsiAppForm | None = None
    homogeneous: bool = True
    notes: list[str] = Field(default_factory=list)

    @property
    def uses_B0(self) -> bool:
        return self.projector == "kernel_AB0"


def _near(ratio: float, target: float) -> bool:
    return abs(ratio - target) <= RATIO_TOLERANCE * max(1.0, target)


def _table2(mu: float, ratio: float) -> tuple[PsiAppForm | None, str, bool]:
    """(form, row label, needs W = 0) for the single-power cases."""
    if mu == 0:
        return "averaged", "mu = 0", False
    if _near(ratio, 1.0):
        return "lorentzian", "mu/p = 1", True
    if _near(ratio, 2.0):
        return "gamma_over_delta2", "mu/p = 2", False
    if ratio < 2.0 / 3.0 and not _near(ratio, 2.0 / 3.0):
        return "inv_gamma", "0 < mu/p < 2/3", True
    if 4.0 / 3.0 < ratio < 2.0 and not _near(ratio, 4.0 / 3.0):
        return "gamma_over_delta2", "4/3 < mu/p < 2", True
    if ratio > 2.0:
        return "zero", "2 < mu/p", False
    return None, NO_REDUCTION, False


def regime_classify(mu: float, p: float, finite_N: bool, W_zero: bool) -> RegimeInfo:
    """Classify the scaling regime of ``(mu, p)``.

    With ``finite_N`` the four finite-level rows apply and always conclude.
    Otherwise only single-power cases reduce to a homogeneous rate equation,
    and the ones with a singular rate need ``W = 0``.
    """
    if not 0 <= mu < 0.5:
        raise ValueError(f"mu must lie in [0, 1/2), got {mu}.")
    if p <= 0:
        raise ValueError(f"p must be positive, got {p}.")
    ratio = mu / p
    nu = Scaling(eps=1.0, mu=mu, p=p).nu
    projector: ProjectorKind = (
        "kernel_A" if ratio > 2.0 or _near(ratio, 2.0) else "kernel_AB0"
    )
    form, form_row, needs_W_zero = _table2(mu, ratio)
    notes: list[str] = []
    if mu == 0:
        notes.append("mu = 0: use the averaged rates, the dominant formula does not apply")

    if finite_N:
        if _near(ratio, 1.0):
            row, sigma, difference = "mu/p = 1", mu, "transition rates"
        elif ratio < 1.0:
            row, sigma, difference = "0 <= mu/p < 1", mu, "none"
        elif projector == "kernel_AB0":
            row, sigma = "1 < mu/p < 2", 2 * p - mu
            difference = "transition rates and time-layer"
        else:
            row, sigma = "2 <= mu/p", mu
            difference = "projector and asymptotic state"
        return RegimeInfo(
            mu=mu,
            p=p,
            ratio=ratio,
            finite_N=True,
            W_zero=W_zero,
            row=row,
            sigma=sigma,
            nu=nu,
            projector=projector,
            difference=difference,
            psi_app_form=form,
            homogeneous=True,
            notes=notes,
        )

    if form is None or (needs_W_zero and not W_zero):
        if form is not None:
            notes.append(f"{form_row}: a singular rate only reduces when W = 0")
        return RegimeInfo(
            mu=mu,
            p=p,
            ratio=ratio,
            finite_N=False,
            W_zero=W_zero,
            row=NO_REDUCTION,
            sigma=None,
            nu=nu,
            projector=projector,
            homogeneous=False,
            notes=notes,
        )
    if form == "averaged":
        sigma = 0.0
    elif form in ("inv_gamma", "lorentzian"):
        sigma = mu
    elif form_row == "4/3 < mu/p < 2":
        sigma = 2 * p - mu
        notes.append("requires delta(n,m) != 0 on every resonant pair")
    else:
        sigma = 0.0
    return RegimeInfo(
        mu=mu,
        p=p,
        ratio=ratio,
        finite_N=False,
        W_zero=W_zero,
        row=form_row,
        sigma=sigma,
        nu=nu,
        projector=projector,
        psi_app_form=form,
        homogeneous=True,
        notes=notes,
    )


def regime_for(scaling: Scaling, system: LevelSystem, finite_N: bool = True) -> RegimeInfo:
    return regime_classify(
        scaling.mu, scaling.p, finite_N, W_zero=not np.any(system.W_matrix)
    )


class RateSplit(NamedTuple):
    """``eps^-mu A + eps^-nu B_eps`` equals the dominant rate; ``B0`` is the eps -> 0 limit of ``B_eps``."""

    A: RateMatrix
    B_eps: RateMatrix
    nu: float
    B0: RateMatrix


def delta_tolerance(system: LevelSystem) -> float:
    return DELTA_RTOL * (1.0 + float(np.max(np.abs(system.delta_diff()))))


def split_AB(
    system: LevelSystem,
    field: QuasiPeriodicField,
    scaling: Scaling,
    res: ResonanceSet,
) -> RateSplit:
    """Split the dominant rate into its degenerate (A) and detuned (B) parts.

    Raises:
        RegimeError: If ``mu == 0``.
    """
    mu, p, eps = scaling.mu, scaling.p, scaling.eps
    if mu == 0:
        raise RegimeError("split_AB needs mu > 0.")
    C = resonant_weight(system, field, res)
    gamma = system.gamma_matrix
    delta = system.delta_diff()
    degenerate = np.abs(delta) <= delta_tolerance(system)
    has_rate = (C > 0) & (gamma > 0)
    safe_gamma = np.where(gamma > 0, gamma, 1.0)
    safe_delta = np.where(degenerate, 1.0, delta)

    A = np.where(degenerate & has_rate, C / safe_gamma, 0.0)
    detuned = (~degenerate) & has_rate
    ratio = mu / p
    with np.errstate(divide="ignore", invalid="ignore"):
        if mu <= p:
            B_eps = C * gamma / (gamma**2 + eps ** (2 * (p - mu)) * delta**2)
        else:
            B_eps = C * gamma / (eps ** (2 * (mu - p)) * gamma**2 + delta**2)
        if _near(ratio, 1.0):
            B0 = C * gamma / (gamma**2 + delta**2)
        elif ratio < 1.0:
            B0 = C / safe_gamma
        else:
            B0 = C * gamma / safe_delta**2
    B_eps = np.where(detuned, B_eps, 0.0)
    B0 = np.where(detuned, B0, 0.0)
    return RateSplit(
        A=RateMatrix(_offdiagonal(A)),
        B_eps=RateMatrix(_offdiagonal(B_eps)),
        nu=scaling.nu,
        B0=RateMatrix(_offdiagonal(B0)),
    )


def psi_app(
    system: LevelSystem,
    field: QuasiPeriodicField,
    res: ResonanceSet,
    regime: RegimeInfo,
) -> RateMatrix:
    """Single-power approximate rate ``C(n,m)`` times the regime's form.

    Raises:
        RegimeError: If the regime has no homogeneous reduction.
    """
    if not regime.homogeneous or regime.psi_app_form is None:
        raise RegimeError(f"{NO_REDUCTION} for mu/p = {regime.ratio:.6g}.")
    n = system.N
    form = regime.psi_app_form
    if form == "averaged":
        return RateMatrix(
            _lorentzian_sum(
                system, field, damping=system.gamma_matrix, detuning=np.zeros((n, n))
            )
        )
    if form == "zero":
        return RateMatrix.zeros(n)
    C = resonant_weight(system, field, res)
    gamma = system.gamma_matrix
    delta = system.delta_diff()
    safe_gamma = np.where(gamma > 0, gamma, 1.0)
    if form == "inv_gamma":
        table = np.where(gamma > 0, C / safe_gamma, 0.0)
    elif form == "lorentzian":
        denominator = gamma**2 + delta**2
        table = np.divide(
            C * gamma, denominator, out=np.zeros_like(C), where=denominator > 0
        )
    else:
        detuned = np.abs(delta) > delta_tolerance(system)
        table = np.where(detuned, C * gamma / np.where(detuned, delta, 1.0) ** 2, 0.0)
    return RateMatrix(_offdiagonal(table))
