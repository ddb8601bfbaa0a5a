"""Level systems: energies, relaxation tables and dipole couplings."""

from __future__ import annotations

from typing import Annotated, Any, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import (
    BaseModel,
    BeforeValidator,
    ConfigDict,
    Field,
    PlainSerializer,
    model_validator,
)

from bloch_rates._util.constants import HERMITIAN_RTOL


def parse_complex(value: Any) -> complex:
    """Accept a number, a ``"1+2j"`` string or a ``[re, im]`` pair."""
    if isinstance(value, complex):
        return value
    if isinstance(value, (int, float, np.number)):
        return complex(value)
    if isinstance(value, str):
        return complex(value.replace(" ", ""))
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    raise ValueError(f"Cannot interpret {value!r} as a complex number.")


def dump_complex(value: complex) -> list[float]:
    return [value.real, value.imag]


ComplexValue = Annotated[
    complex, BeforeValidator(parse_complex), PlainSerializer(dump_complex)
]

RealTable = tuple[tuple[float, ...], ...]
ComplexTable = tuple[tuple[ComplexValue, ...], ...]


def as_table(values: ArrayLike) -> tuple[tuple[Any, ...], ...]:
    arr = np.asarray(values)
    return tuple(tuple(row) for row in arr.tolist())


def hermitian_tolerance(matrix: NDArray[Any]) -> float:
    scale = float(np.max(np.abs(matrix))) if matrix.size else 0.0
    return HERMITIAN_RTOL * (1.0 + scale)


class LevelSystem(BaseModel):
    """An N-level atom: energies, perturbations, relaxation and couplings.

    Tables are stored as nested tuples so the model stays immutable and
    serializes to plain YAML/JSON. Use the ``*_matrix`` accessors for numpy
    views.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    omega: tuple[float, ...] = Field(
        description="Level energies omega(n), dimensionless."
    )
    delta: tuple[float, ...] | None = Field(
        default=None,
        description="Level perturbations delta(n); zeros when omitted.",
    )
    gamma: RealTable = Field(
        description="Symmetric transverse relaxation table gamma(n,m), zero diagonal."
    )
    W: RealTable | None = Field(
        default=None,
        description="Pauli coefficients W(n,m) (rate from n to m), zero diagonal; zeros when omitted.",
    )
    V: ComplexTable = Field(description="Hermitian dipole coupling table V(n,m).")
    temperature: float | None = Field(
        default=None,
        gt=0,
        description="Normalized temperature T used by the microreversibility check.",
    )

    @model_validator(mode="after")
    def _check_shapes(self) -> LevelSystem:
        n = len(self.omega)
        if n == 0:
            raise ValueError("A level system needs at least one level.")
        if self.delta is not None and len(self.delta) != n:
            raise ValueError(f"delta has {len(self.delta)} entries, expected {n}.")
        for name in ("gamma", "W", "V"):
            table = getattr(self, name)
            if table is None:
                continue
            if len(table) != n or any(len(row) != n for row in table):
                raise ValueError(f"{name} must be a {n}x{n} table.")
        for name in ("omega_vector", "delta_vector", "gamma_matrix", "W_matrix"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name.split('_')[0]} contains non-finite values.")
        if not np.all(np.isfinite(self.V_matrix)):
            raise ValueError("V contains non-finite values.")
        return self

    @classmethod
    def from_arrays(
        cls,
        omega: ArrayLike,
        gamma: ArrayLike,
        V: ArrayLike,
        delta: ArrayLike | None = None,
        W: ArrayLike | None = None,
        temperature: float | None = None,
    ) -> LevelSystem:
        return cls(
            omega=tuple(np.asarray(omega, dtype=float).tolist()),
            delta=None
            if delta is None
            else tuple(np.asarray(delta, dtype=float).tolist()),
            gamma=as_table(np.asarray(gamma, dtype=float)),
            W=None if W is None else as_table(np.asarray(W, dtype=float)),
            V=as_table(np.asarray(V, dtype=complex)),
            temperature=temperature,
        )

    @property
    def N(self) -> int:
        return len(self.omega)

    @property
    def omega_vector(self) -> NDArray[np.float64]:
        return np.asarray(self.omega, dtype=float)

    @property
    def delta_vector(self) -> NDArray[np.float64]:
        if self.delta is None:
            return np.zeros(self.N)
        return np.asarray(self.delta, dtype=float)

    @property
    def gamma_matrix(self) -> NDArray[np.float64]:
        return np.asarray(self.gamma, dtype=float).reshape(self.N, self.N)

    @property
    def W_matrix(self) -> NDArray[np.float64]:
        if self.W is None:
            return np.zeros((self.N, self.N))
        return np.asarray(self.W, dtype=float).reshape(self.N, self.N)

    @property
    def V_matrix(self) -> NDArray[np.complex128]:
        return np.asarray(self.V, dtype=complex).reshape(self.N, self.N)

    def omega_diff(self) -> NDArray[np.float64]:
        """omega(n,m) = omega(n) - omega(m)."""
        w = self.omega_vector
        return w[:, None] - w[None, :]

    def delta_diff(self) -> NDArray[np.float64]:
        d = self.delta_vector
        return d[:, None] - d[None, :]

    def replace(self, **update: Any) -> LevelSystem:
        """Copy with some fields replaced, revalidating the result."""
        data = self.model_dump()
        data.update(update)
        return LevelSystem.model_validate(data)


class ValidationReport(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    violations: list[str] = Field(default_factory=list)
    gamma_floor: float | None = Field(
        default=None, description="Floor used for the transverse relaxation check."
    )
    hermiticity_residual: float = 0.0
    microreversibility_residual: float | None = None

    @property
    def valid(self) -> bool:
        return not self.violations


def _pair(n: int, m: int) -> str:
    return f"({n + 1},{m + 1})"


def validate_system(
    system: LevelSystem, gamma_floor: float | None = None
) -> ValidationReport:
    """List every violated invariant of a level system.

    Args:
        system: System to check.
        gamma_floor: Lower bound for off-diagonal gamma. Defaults to the
            smallest positive off-diagonal gamma present.
    """
    violations: list[str] = []
    n = system.N
    gamma = system.gamma_matrix
    W = system.W_matrix
    V = system.V_matrix
    off = ~np.eye(n, dtype=bool)

    tol = hermitian_tolerance(gamma)
    asym = np.abs(gamma - gamma.T)
    if np.any(asym > tol):
        i, j = np.unravel_index(np.argmax(asym), asym.shape)
        violations.append(f"gamma symmetry: gamma{_pair(i, j)} != gamma{_pair(j, i)}")
    if np.any(np.diag(gamma) != 0.0):
        violations.append("gamma diagonal: gamma(n,n) must be 0")
    if np.any(gamma[off] < 0):
        violations.append("gamma sign: negative relaxation coefficient")

    off_gamma = gamma[off]
    positive = off_gamma[off_gamma > 0]
    if gamma_floor is None and positive.size:
        gamma_floor = float(positive.min())
    if off_gamma.size:
        zeros = np.argwhere((gamma <= 0) & off)
        if zeros.size:
            i, j = zeros[0]
            violations.append(
                f"gamma floor: gamma{_pair(i, j)} = {gamma[i, j]} is not positive"
            )
        elif gamma_floor is not None and off_gamma.min() < gamma_floor:
            violations.append(
                f"gamma floor: min gamma {off_gamma.min()} below floor {gamma_floor}"
            )

    if np.any(W[off] < 0):
        violations.append("W sign: negative Pauli coefficient")
    if np.any(np.diag(W) != 0.0):
        violations.append("W diagonal: W(n,n) must be 0")

    herm_residual = float(np.max(np.abs(V - V.conj().T)))
    if herm_residual > hermitian_tolerance(V):
        violations.append(f"V hermiticity: residual {herm_residual:.3e}")

    micro: float | None = None
    if system.temperature is not None:
        # W(n,m) = exp((omega(n) - omega(m)) / T) W(m,n)
        factor = np.exp(system.omega_diff() / system.temperature)
        micro = float(np.max(np.abs(W - factor * W.T)))
        if micro > hermitian_tolerance(W):
            violations.append(f"microreversibility: residual {micro:.3e}")

    return ValidationReport(
        violations=violations,
        gamma_floor=gamma_floor,
        hermiticity_residual=herm_residual,
        microreversibility_residual=micro,
    )


def pauli_rates(
    omega: Sequence[float] | NDArray[np.float64],
    temperature: float,
    base: ArrayLike,
) -> NDArray[np.float64]:
    """Build Pauli coefficients that satisfy microreversibility exactly.

    ``base`` must be symmetric and nonnegative; the result is
    ``base(n,m) * exp((omega(n) - omega(m)) / (2T))`` with a zero diagonal.
    """
    if temperature <= 0:
        raise ValueError("temperature must be positive.")
    b = np.asarray(base, dtype=float)
    if not np.allclose(b, b.T) or np.any(b < 0):
        raise ValueError("base must be symmetric and nonnegative.")
    w = np.asarray(omega, dtype=float)
    W = b * np.exp((w[:, None] - w[None, :]) / (2.0 * temperature))
    np.fill_diagonal(W, 0.0)
    return W
