"""Generator rules for growing level sets, used by truncation diagnostics."""

from __future__ import annotations

from typing import Literal

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field

from bloch_rates._model.state import Populations
from bloch_rates._model.system import LevelSystem, as_table, pauli_rates


class LevelFamily(BaseModel):
    """A rule producing the first N levels of a countable level set.

    ``rydberg`` energies ``scale * (1 - 1/n^2)`` accumulate at the ionisation
    energy ``scale``; ``ladder`` energies ``scale * n`` are equally spaced so
    every neighbouring pair resonates with a field of frequency ``scale``.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    energies: Literal["rydberg", "ladder"] = "rydberg"
    scale: float = Field(default=1.0, gt=0)
    coupling: float = Field(default=1.0, ge=0, description="V(1,2).")
    coupling_decay: Literal["geometric", "power"] = "geometric"
    decay: float = Field(
        default=0.5,
        gt=0,
        description="Ratio q of geometric decay (q^(n+m-3)) or exponent a of power decay ((nm/2)^-a).",
    )
    coupling_range: Literal["nearest", "all"] = "nearest"
    gamma: float = Field(default=1.0, gt=0)
    delta: float = Field(
        default=0.0, description="delta(n) = delta * (-1)^n perturbation amplitude."
    )
    pauli: float = Field(default=0.0, ge=0, description="Pauli base amplitude w0.")
    pauli_decay: float = Field(
        default=2.0, gt=0, description="Exponent K of the ((1+n)(1+m))^-K Pauli tail."
    )
    pauli_range: Literal["nearest", "all"] = "nearest"
    temperature: float = Field(default=1.0, gt=0)
    population_decay: float = Field(
        default=0.5,
        gt=0,
        lt=1,
        description="Initial populations (1-q) q^(n-1).",
    )

    def levels(self, N: int) -> NDArray[np.float64]:
        return np.arange(1, N + 1, dtype=float)

    def _pattern(self, N: int, reach: Literal["nearest", "all"]) -> NDArray[np.bool_]:
        n = self.levels(N)
        gap = np.abs(n[:, None] - n[None, :])
        return (gap == 1) if reach == "nearest" else (gap > 0)

    def energies_of(self, N: int) -> NDArray[np.float64]:
        n = self.levels(N)
        if self.energies == "rydberg":
            return self.scale * (1.0 - 1.0 / n**2)
        return self.scale * n

    def coupling_table(self, N: int) -> NDArray[np.float64]:
        n = self.levels(N)
        if self.coupling_decay == "geometric":
            magnitude = self.coupling * self.decay ** (np.add.outer(n, n) - 3.0)
        else:
            magnitude = self.coupling * (np.multiply.outer(n, n) / 2.0) ** (-self.decay)
        return np.where(self._pattern(N, self.coupling_range), magnitude, 0.0)

    def pauli_table(self, N: int) -> NDArray[np.float64]:
        n = self.levels(N)
        base = np.where(
            self._pattern(N, self.pauli_range),
            self.pauli * np.multiply.outer(1.0 + n, 1.0 + n) ** (-self.pauli_decay),
            0.0,
        )
        return pauli_rates(self.energies_of(N), self.temperature, base)

    def build(self, N: int) -> LevelSystem:
        if N < 1:
            raise ValueError("N must be at least 1.")
        n = self.levels(N)
        omega = self.energies_of(N)
        V = self.coupling_table(N)
        gamma = np.full((N, N), self.gamma)
        np.fill_diagonal(gamma, 0.0)
        W = self.pauli_table(N)
        return LevelSystem(
            omega=tuple(omega.tolist()),
            delta=tuple((self.delta * (-1.0) ** n).tolist()),
            gamma=as_table(gamma),
            W=as_table(W),
            V=as_table(V.astype(complex)),
            temperature=self.temperature,
        )

    def populations(self, N: int) -> Populations:
        """The first N entries of the infinite initial datum (not renormalized)."""
        q = self.population_decay
        return Populations.of((1.0 - q) * q ** (self.levels(N) - 1.0))
