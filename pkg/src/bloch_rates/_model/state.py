"""Density matrices and population vectors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from bloch_rates._model.system import hermitian_tolerance


def _frozen(arr: NDArray[np.generic]) -> NDArray[np.generic]:
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class DensityMatrix:
    entries: NDArray[np.complex128]

    def __post_init__(self) -> None:
        entries = np.asarray(self.entries, dtype=complex)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise ValueError(f"density matrix must be square, got {entries.shape}.")
        object.__setattr__(self, "entries", _frozen(entries))

    @property
    def N(self) -> int:
        return self.entries.shape[0]

    @property
    def diagonal(self) -> NDArray[np.float64]:
        return np.real(np.diag(self.entries)).copy()

    @property
    def trace(self) -> complex:
        return complex(np.trace(self.entries))

    def hermiticity_residual(self) -> float:
        return float(np.max(np.abs(self.entries - self.entries.conj().T)))

    def is_hermitian(self) -> bool:
        return self.hermiticity_residual() <= hermitian_tolerance(self.entries)

    def coherence_norm(self) -> float:
        """l1 norm of the off-diagonal part."""
        return coherence_l1(self.entries)


def coherence_l1(entries: NDArray[np.complex128]) -> float:
    return float(np.sum(np.abs(entries)) - np.sum(np.abs(np.diag(entries))))


@dataclass(frozen=True)
class Populations:
    values: NDArray[np.float64]

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1:
            raise ValueError("populations must be a vector.")
        if not np.all(np.isfinite(values)):
            raise ValueError("populations must be finite.")
        if np.any(values < 0):
            raise ValueError(f"populations must be nonnegative, got min {values.min()}.")
        object.__setattr__(self, "values", _frozen(values))

    @classmethod
    def of(cls, values: ArrayLike) -> Populations:
        return cls(np.asarray(values, dtype=float))

    @property
    def N(self) -> int:
        return self.values.shape[0]

    @property
    def total(self) -> float:
        return float(np.sum(self.values))


def well_prepared_state(pop: Populations | ArrayLike) -> DensityMatrix:
    """Diagonal density matrix with the given populations and no coherences."""
    if not isinstance(pop, Populations):
        pop = Populations.of(pop)
    return DensityMatrix(np.diag(pop.values).astype(complex))
