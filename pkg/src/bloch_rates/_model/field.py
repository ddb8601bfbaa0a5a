"""Quasiperiodic forcing fields with finite Fourier support."""

from __future__ import annotations

from functools import cached_property
from logging import getLogger
from typing import Mapping, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict, Field, model_validator

from bloch_rates._model.system import ComplexValue

logger = getLogger(__name__)


class FourierMode(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    alpha: tuple[int, ...] = Field(description="Integer multi-index alpha.")
    value: ComplexValue = Field(description="Fourier coefficient phi_alpha.")


class QuasiPeriodicField(BaseModel):
    """A real signal phi(s) = sum over alpha of phi_alpha exp(i alpha.freq s)."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    freq: tuple[float, ...] = Field(description="Base frequency vector omega.")
    modes: tuple[FourierMode, ...] = Field(
        default=(), description="Finitely supported Fourier coefficients."
    )

    @model_validator(mode="after")
    def _check_modes(self) -> QuasiPeriodicField:
        r = len(self.freq)
        if r == 0:
            raise ValueError("A field needs at least one base frequency.")
        seen: set[tuple[int, ...]] = set()
        for mode in self.modes:
            if len(mode.alpha) != r:
                raise ValueError(
                    f"multi-index {mode.alpha} does not have {r} components."
                )
            if mode.alpha in seen:
                raise ValueError(f"multi-index {mode.alpha} listed twice.")
            seen.add(mode.alpha)
        coeffs = self.coefficients
        scale = 1.0 + max((abs(v) for v in coeffs.values()), default=0.0)
        for alpha, value in coeffs.items():
            mirror = coeffs.get(tuple(-a for a in alpha), 0.0)
            if abs(mirror - value.conjugate()) > 1e-12 * scale:
                raise ValueError(
                    f"field is not real: phi{tuple(-a for a in alpha)} != conj(phi{alpha})."
                )
        return self

    @classmethod
    def from_coefficients(
        cls, freq: Sequence[float], coefficients: Mapping[tuple[int, ...], complex]
    ) -> QuasiPeriodicField:
        return cls(
            freq=tuple(float(f) for f in freq),
            modes=tuple(
                FourierMode(alpha=tuple(alpha), value=complex(value))
                for alpha, value in sorted(coefficients.items())
            ),
        )

    @classmethod
    def cosine(cls, frequency: float, amplitude: float = 1.0) -> QuasiPeriodicField:
        """``2 * amplitude * cos(frequency * s)``."""
        return cls.from_coefficients(
            [frequency], {(1,): amplitude, (-1,): amplitude}
        )

    @classmethod
    def zero(cls, r: int = 1) -> QuasiPeriodicField:
        return cls(freq=tuple([1.0] * r))

    @property
    def r(self) -> int:
        return len(self.freq)

    @cached_property
    def coefficients(self) -> dict[tuple[int, ...], complex]:
        return {mode.alpha: mode.value for mode in self.modes if mode.value != 0}

    @property
    def alphas(self) -> NDArray[np.int64]:
        """Support multi-indices as an (M, r) integer array."""
        keys = list(self.coefficients)
        if not keys:
            return np.zeros((0, self.r), dtype=np.int64)
        return np.asarray(keys, dtype=np.int64).reshape(len(keys), self.r)

    @property
    def values(self) -> NDArray[np.complex128]:
        return np.asarray(list(self.coefficients.values()), dtype=complex)

    @property
    def freq_vector(self) -> NDArray[np.float64]:
        return np.asarray(self.freq, dtype=float)

    def mode_frequencies(self) -> NDArray[np.float64]:
        """alpha . omega for every support multi-index."""
        return self.alphas @ self.freq_vector

    @property
    def support_bound(self) -> int:
        """B_max = max |alpha|_1 over the support (0 for the zero field)."""
        alphas = self.alphas
        if alphas.size == 0:
            return 0
        return int(np.max(np.sum(np.abs(alphas), axis=1)))

    def weight(self, beta: tuple[int, ...]) -> float:
        """|phi_beta|^2."""
        return abs(self.coefficients.get(tuple(beta), 0.0)) ** 2

    def is_zero(self) -> bool:
        return not self.coefficients

    def period(self) -> float | None:
        """Common period when r = 1 and the field is not constant."""
        if self.r != 1 or self.freq[0] == 0:
            return None
        return 2.0 * np.pi / abs(self.freq[0])

    def evaluate(self, s: ArrayLike) -> NDArray[np.complex128]:
        """Complex values of the Fourier sum on an array of fast times."""
        s_arr = np.asarray(s, dtype=float)
        phases = np.multiply.outer(s_arr, self.mode_frequencies())
        return np.exp(1j * phases) @ self.values


def field_value(field: QuasiPeriodicField, t: float) -> float:
    """Evaluate the real field at time ``t``."""
    value = complex(field.evaluate(np.asarray(t)))
    scale = float(np.sum(np.abs(field.values)))
    if abs(value.imag) > 1e-12 * max(scale, 1.0):
        logger.warning(f"field imaginary part {value.imag:.3e} at t={t}")
    return value.real
